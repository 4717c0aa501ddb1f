#include "wl3d/search.hpp"

#include <algorithm>
#include <chrono>
#include <future>
#include <optional>
#include <set>

#include <nlohmann/json.hpp>

namespace wl3d {

namespace {

std::vector<Tick> multiset_key(const DistanceMatrix& d) {
  std::vector<Tick> key;
  key.reserve(static_cast<std::size_t>(d.n) * (d.n - 1) / 2);
  for (int i = 0; i < d.n; ++i)
    for (int j = i + 1; j < d.n; ++j) key.push_back(d.at(i, j));
  std::sort(key.begin(), key.end());
  return key;
}

struct PoolEntry {
  PointCloud cloud;
  std::vector<Tick> key;
  std::string provenance;
  std::map<std::string, Fingerprint> prints;
};

struct Campaign {
  const SearchConfig& config;
  Tolerance tol;
  SearchReport report;
  long long next_trial_id = 0;
  std::set<std::pair<std::string, std::string>> found_keys;

  explicit Campaign(const SearchConfig& c) : config(c), tol{c.epsilon} {
    report.config = c;
    for (const Variant& v : c.variants) report.counterexamples_per_variant[v.name()] = 0;
  }

  std::map<std::string, Fingerprint> prints_of(const PointCloud& cloud) {
    std::map<std::string, Fingerprint> out;
    for (const Variant& v : config.variants)
      out[v.name()] = refine_to_stable(cloud, v, tol).fingerprint;
    return out;
  }

  void test_pair(const PoolEntry& a, const PoolEntry& b, const std::string& provenance) {
    TrialRecord rec;
    rec.id = next_trial_id++;
    rec.n = a.cloud.n();
    rec.provenance = provenance;
    ++report.pairs_tested;

    bool any_equal = false;
    for (const Variant& v : config.variants) {
      const bool eq = a.prints.at(v.name()) == b.prints.at(v.name());
      rec.fingerprints_equal[v.name()] = eq;
      any_equal |= eq;
    }

    std::optional<bool> congruent_result;
    if (a.cloud.n() <= 10) {
      congruent_result = congruent(a.cloud, b.cloud, tol).has_value();
      rec.oracle = *congruent_result ? "congruent" : "non-congruent";
    } else {
      rec.oracle = "skipped";
    }

    if (any_equal && congruent_result.has_value() && !*congruent_result) {
      for (const Variant& v : config.variants)
        if (rec.fingerprints_equal[v.name()]) {
          rec.counterexample_variants.push_back(v.name());
          ++report.counterexamples_per_variant[v.name()];
        }
      const Fingerprint fa = refine_to_stable(a.cloud, {3, Flavor::FWL}, tol).fingerprint;
      const Fingerprint fb = refine_to_stable(b.cloud, {3, Flavor::FWL}, tol).fingerprint;
      ++report.found_total;
      // Distinct congruence classes only: the digest pair keys the finding.
      auto key = std::minmax(fa.digest, fb.digest);
      if (found_keys.insert({key.first, key.second}).second &&
          report.found.size() < 50) {
        FoundCounterexample f;
        f.trial_id = rec.id;
        f.provenance = provenance;
        f.cloud_a_xyz = format_xyz(a.cloud, "counterexample side a; " + a.provenance);
        f.cloud_b_xyz = format_xyz(b.cloud, "counterexample side b; " + b.provenance);
        f.variants_fooled = rec.counterexample_variants;
        f.fwl3_distinguishes = fa != fb;
        report.found.push_back(std::move(f));
      }
    }
    if (report.records.size() < 20000) report.records.push_back(std::move(rec));
  }
};

// Deterministic cycle of structured base clouds for the exchange campaign:
// lattice boxes and the symmetric templates, which carry the repeated
// distances the swap construction needs.
PointCloud exchange_base(const SearchConfig& config, int index, std::string* provenance) {
  const int n = config.n_lo + index % (config.n_hi - config.n_lo + 1);
  const std::uint64_t seed = config.seed * 1000003ULL + static_cast<std::uint64_t>(index);
  const int kind = index % 5;
  switch (kind) {
    case 0: {
      *provenance = "lattice n=" + std::to_string(n) + " seed=" + std::to_string(seed);
      return lattice_cloud(n, config.lattice_extent, seed);
    }
    case 1:
      *provenance = "planar n=" + std::to_string(n) + " seed=" + std::to_string(seed);
      return symmetric_cloud(SymmetricTemplate::Planar, n, seed);
    case 2:
      *provenance = "prism n=" + std::to_string(std::max(n, 6)) + " seed=" + std::to_string(seed);
      return symmetric_cloud(SymmetricTemplate::Prism, std::max(n, 6), seed);
    case 3:
      *provenance =
          "square-pyramid n=" + std::to_string(n) + " seed=" + std::to_string(seed);
      return symmetric_cloud(SymmetricTemplate::SquarePyramid, n, seed);
    default:
      *provenance = "mirror-pair n=" + std::to_string(n) + " seed=" + std::to_string(seed);
      return symmetric_cloud(SymmetricTemplate::MirrorPair, n, seed);
  }
}

void run_pair_family(Campaign& campaign) {
  const SearchConfig& config = campaign.config;
  const auto make_pair = [&config, &campaign](int t) {
    const int n = config.n_lo + t % (config.n_hi - config.n_lo + 1);
    FamilySpec spec;
    spec.family = config.family;
    spec.n = n;
    spec.symmetric_template = config.symmetric_template;
    spec.lattice_extent = config.lattice_extent;

    std::pair<PoolEntry, PoolEntry> out;
    spec.seed = config.seed * 1000003ULL + 2ULL * t;
    out.first.cloud = cloud_from_spec(spec);
    out.first.provenance = family_name(config.family) + " seed=" + std::to_string(spec.seed);
    spec.seed = config.seed * 1000003ULL + 2ULL * t + 1ULL;
    out.second.cloud = cloud_from_spec(spec);
    out.second.provenance = family_name(config.family) + " seed=" + std::to_string(spec.seed);
    out.first.prints = campaign.prints_of(out.first.cloud);
    out.second.prints = campaign.prints_of(out.second.cloud);
    return out;
  };

  // Trials are pure functions of (config, trial index); workers evaluate
  // them independently and the results merge in trial order, so the report
  // does not depend on the job count.
  const int jobs = std::max(config.jobs, 1);
  for (int start = 0; start < config.trials; start += jobs) {
    const int batch = std::min(jobs, config.trials - start);
    std::vector<std::future<std::pair<PoolEntry, PoolEntry>>> futures;
    for (int k = 1; k < batch; ++k)
      futures.push_back(std::async(std::launch::async, make_pair, start + k));
    std::vector<std::pair<PoolEntry, PoolEntry>> ready;
    ready.push_back(make_pair(start));
    for (auto& f : futures) ready.push_back(f.get());
    for (auto& [a, b] : ready)
      campaign.test_pair(a, b, "independent draws: " + a.provenance + " vs " + b.provenance);
  }
}

void run_exchange_family(Campaign& campaign) {
  const SearchConfig& config = campaign.config;
  const Tolerance tol{config.epsilon};
  std::vector<PoolEntry> pool;

  const auto admit = [&](PointCloud cloud, const std::string& provenance) {
    PoolEntry entry;
    entry.key = multiset_key(distance_matrix(cloud, tol));
    entry.cloud = std::move(cloud);
    entry.provenance = provenance;
    entry.prints = campaign.prints_of(entry.cloud);
    // Equal global distance multisets are a necessary condition for WL
    // confusion, so the pool only ever compares within a key; a per-key cap
    // keeps repeated template draws from exploding quadratically.
    int compared = 0;
    for (const PoolEntry& other : pool) {
      if (other.cloud.n() != entry.cloud.n() || other.key != entry.key) continue;
      campaign.test_pair(other, entry, other.provenance + " vs " + entry.provenance);
      if (++compared >= 8) break;
    }
    pool.push_back(std::move(entry));
  };

  for (int base_index = 0; base_index < config.trials; ++base_index) {
    if (campaign.report.candidates_constructed >= config.budget) {
      campaign.report.budget_exhausted = true;
      break;
    }
    std::string provenance;
    PointCloud base;
    try {
      base = exchange_base(config, base_index, &provenance);
    } catch (const Error&) {
      continue;
    }
    const PointCloud base_copy = base;  // admit() may reallocate the pool
    admit(std::move(base), provenance);

    const int n = base_copy.n();
    for (int i = 0; i < n; ++i) {
      for (int p = 0; p < n; ++p) {
        if (p == i) continue;
        for (int q = p + 1; q < n; ++q) {
          if (q == i) continue;
          if (campaign.report.candidates_constructed >= config.budget) {
            campaign.report.budget_exhausted = true;
            return;
          }
          ++campaign.report.candidates_constructed;
          std::optional<CandidatePair> pair;
          try {
            pair = apply_exchange(base_copy, i, p, q, tol);
          } catch (const Error&) {
            continue;
          }
          if (!pair) continue;
          const std::string swap_desc = provenance + " swap(" + std::to_string(i) + ";" +
                                        std::to_string(p) + "," + std::to_string(q) + ")";
          admit(std::move(pair->cloud_b), swap_desc);
        }
      }
    }
  }
}

}  // namespace

SearchReport run_search(const SearchConfig& config) {
  const auto started = std::chrono::steady_clock::now();
  Campaign campaign(config);
  if (config.family == Family::Exchange) {
    run_exchange_family(campaign);
  } else {
    run_pair_family(campaign);
  }
  std::sort(campaign.report.records.begin(), campaign.report.records.end(),
            [](const TrialRecord& a, const TrialRecord& b) { return a.id < b.id; });
  campaign.report.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return campaign.report;
}

std::string SearchConfig::to_json() const {
  nlohmann::json j;
  std::vector<std::string> names;
  for (const Variant& v : variants) names.push_back(v.name());
  j["variants"] = names;
  j["family"] = family_name(family);
  j["symmetric_template"] = template_name(symmetric_template);
  j["n_lo"] = n_lo;
  j["n_hi"] = n_hi;
  j["trials"] = trials;
  j["budget"] = budget;
  j["epsilon"] = epsilon;
  j["seed"] = seed;
  j["lattice_extent"] = lattice_extent;
  j["jobs"] = jobs;
  return j.dump(2);
}

SearchConfig SearchConfig::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("invalid config JSON: ") + e.what());
  }
  SearchConfig c;
  try {
    if (j.contains("variants")) {
      c.variants.clear();
      for (const auto& name : j.at("variants"))
        c.variants.push_back(Variant::parse(name.get<std::string>()));
    }
    if (j.contains("family")) c.family = family_parse(j.at("family").get<std::string>());
    if (j.contains("symmetric_template"))
      c.symmetric_template = template_parse(j.at("symmetric_template").get<std::string>());
    if (j.contains("n_lo")) c.n_lo = j.at("n_lo").get<int>();
    if (j.contains("n_hi")) c.n_hi = j.at("n_hi").get<int>();
    if (j.contains("trials")) c.trials = j.at("trials").get<int>();
    if (j.contains("budget")) c.budget = j.at("budget").get<long long>();
    if (j.contains("epsilon")) c.epsilon = j.at("epsilon").get<double>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("lattice_extent")) c.lattice_extent = j.at("lattice_extent").get<int>();
    if (j.contains("jobs")) c.jobs = j.at("jobs").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("config fields: ") + e.what());
  }
  if (c.trials < 0 || c.budget < 0 || c.epsilon <= 0 || c.n_lo < 2 || c.n_hi < c.n_lo || c.jobs < 1)
    throw Error(ErrorCode::ParseError, "config bounds must be positive and ordered");
  return c;
}

std::string SearchReport::to_json() const {
  nlohmann::json j;
  j["config"] = nlohmann::json::parse(config.to_json());
  j["candidates_constructed"] = candidates_constructed;
  j["pairs_tested"] = pairs_tested;
  j["budget_exhausted"] = budget_exhausted;
  j["counterexamples_per_variant"] = counterexamples_per_variant;
  j["found_total"] = found_total;
  j["runtime_seconds"] = runtime_seconds;
  nlohmann::json recs = nlohmann::json::array();
  for (const TrialRecord& r : records) {
    recs.push_back({{"id", r.id},
                    {"n", r.n},
                    {"provenance", r.provenance},
                    {"fingerprints_equal", r.fingerprints_equal},
                    {"oracle", r.oracle},
                    {"counterexample_variants", r.counterexample_variants}});
  }
  j["records"] = std::move(recs);
  nlohmann::json founds = nlohmann::json::array();
  for (const FoundCounterexample& f : found) {
    founds.push_back({{"trial_id", f.trial_id},
                      {"provenance", f.provenance},
                      {"cloud_a_xyz", f.cloud_a_xyz},
                      {"cloud_b_xyz", f.cloud_b_xyz},
                      {"variants_fooled", f.variants_fooled},
                      {"fwl3_distinguishes", f.fwl3_distinguishes}});
  }
  j["found_counterexamples"] = std::move(founds);
  return j.dump(2);
}

}  // namespace wl3d
