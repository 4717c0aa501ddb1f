#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>

#include "wl3d/generate.hpp"
#include "wl3d/grouping.hpp"
#include "wl3d/reconstruct.hpp"
#include "wl3d/refinement.hpp"
#include "wl3d/search.hpp"

namespace {

using namespace wl3d;

constexpr int kExitParse = 2;
constexpr int kExitEngine = 3;
constexpr int kExitCompare = 4;
constexpr int kExitReconstruct = 5;

void write_output(const std::string& text, const std::string& path) {
  if (path.empty()) {
    std::cout << text << "\n";
    return;
  }
  std::ofstream f(path);
  if (!f) throw Error(ErrorCode::ParseError, "cannot open " + path + " for writing");
  f << text << "\n";
}

std::string slurp(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorCode::ParseError, "cannot open " + path);
  std::ostringstream buf;
  buf << f.rdbuf();
  return buf.str();
}

int exit_code_for(const Error& e, int domain_default) {
  switch (e.code()) {
    case ErrorCode::ParseError:
    case ErrorCode::DuplicatePoints:
      return kExitParse;
    default:
      return domain_default;
  }
}

std::vector<Variant> parse_variant_list(const std::string& spec) {
  std::vector<Variant> out;
  std::string token;
  std::istringstream in(spec);
  while (std::getline(in, token, ',')) out.push_back(Variant::parse(token));
  if (out.empty()) throw Error(ErrorCode::ParseError, "no variants given");
  return out;
}

int cmd_refine(const std::string& cloud_path, const std::string& variant_name, double eps,
               const std::string& out_path) {
  const Tolerance tol{eps};
  PointCloud cloud;
  try {
    cloud = load_xyz(cloud_path);
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return kExitParse;
  }
  try {
    const Transcript t = refine_to_stable(cloud, Variant::parse(variant_name), tol);
    if (!out_path.empty()) {
      std::ofstream f(out_path);
      if (!f) throw Error(ErrorCode::ParseError, "cannot open " + out_path + " for writing");
      f << transcript_to_json(t) << "\n";
    }
    std::cout << "fingerprint " << t.fingerprint.digest << "\n";
    std::cerr << "refined n=" << t.n << " variant=" << t.variant.name()
              << " rounds=" << t.rounds << " classes=" << t.color_count(t.rounds) << "\n";
    return 0;
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return exit_code_for(e, kExitEngine);
  }
}

int cmd_compare(const std::string& a_path, const std::string& b_path,
                const std::string& variants_spec, double eps, const std::string& out_path) {
  const Tolerance tol{eps};
  PointCloud a, b;
  try {
    a = load_xyz(a_path);
    b = load_xyz(b_path);
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return kExitParse;
  }
  try {
    const std::vector<Variant> variants = parse_variant_list(variants_spec);
    nlohmann::json verdict;
    verdict["n_a"] = a.n();
    verdict["n_b"] = b.n();
    if (a.n() != b.n()) {
      verdict["verdict"] = "SizeMismatch";
      write_output(verdict.dump(2), out_path);
      std::cerr << "clouds differ in size\n";
      return kExitCompare;
    }
    bool any_equal = false;
    for (const Variant& v : variants) {
      const bool eq = refine_to_stable(a, v, tol).fingerprint ==
                      refine_to_stable(b, v, tol).fingerprint;
      verdict["fingerprints_equal"][v.name()] = eq;
      any_equal |= eq;
    }
    if (a.n() <= 10) {
      const auto witness = congruent(a, b, tol);
      verdict["oracle"] = witness.has_value() ? "congruent" : "non-congruent";
      verdict["counterexample"] = any_equal && !witness.has_value();
      if (witness) verdict["oracle_max_residual"] = witness->max_residual;
    } else {
      verdict["oracle"] = "skipped";
      verdict["oracle_skip_reason"] = "n > 10 exceeds the exhaustive bound";
      verdict["counterexample"] = nullptr;
    }
    write_output(verdict.dump(2), out_path);
    return 0;
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return exit_code_for(e, kExitEngine);
  }
}

int cmd_reconstruct(const std::string& transcript_path, double eps,
                    const std::string& out_xyz, const std::string& out_cert) {
  const Tolerance tol{eps};
  Transcript t;
  try {
    t = transcript_from_json(slurp(transcript_path));
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return kExitParse;
  }
  try {
    const Reconstruction rec = reconstruct(t, tol);
    const std::string xyz = format_xyz(rec.cloud, "reconstructed from " + transcript_path);
    if (out_xyz.empty()) std::cout << xyz;
    else {
      std::ofstream f(out_xyz);
      if (!f) throw Error(ErrorCode::ParseError, "cannot open " + out_xyz + " for writing");
      f << xyz;
    }
    write_output(rec.certificate.to_json(), out_cert);
    std::cerr << "reconstructed n=" << rec.cloud.n() << " fingerprint match: "
              << (rec.certificate.fingerprint_match ? "yes" : "NO") << "\n";
    return 0;
  } catch (const Error& e) {
    nlohmann::json err;
    err["error"] = e.code_name();
    err["detail"] = e.what();
    std::cout << err.dump(2) << "\n";
    std::cerr << e.what() << "\n";
    return kExitReconstruct;
  }
}

int cmd_search(const std::string& config_path, const std::string& family_name_arg, int trials,
               long long budget, std::uint64_t seed, double eps, int jobs,
               const std::string& out_path, const std::string& pairs_dir) {
  SearchConfig config;
  try {
    if (!config_path.empty()) config = SearchConfig::from_json(slurp(config_path));
    if (!family_name_arg.empty()) config.family = family_parse(family_name_arg);
    if (trials >= 0) config.trials = trials;
    if (budget >= 0) config.budget = budget;
    if (seed != 0) config.seed = seed;
    if (eps > 0) config.epsilon = eps;
    if (jobs > 0) config.jobs = jobs;
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return kExitParse;
  }
  try {
    const SearchReport report = run_search(config);
    write_output(report.to_json(), out_path);
    if (!pairs_dir.empty() && !report.found.empty()) {
      std::filesystem::create_directories(pairs_dir);
      nlohmann::json provenance = nlohmann::json::array();
      int index = 0;
      for (const FoundCounterexample& f : report.found) {
        const std::string stem = pairs_dir + "/pair_" + std::to_string(index);
        std::ofstream(stem + "_a.xyz") << f.cloud_a_xyz;
        std::ofstream(stem + "_b.xyz") << f.cloud_b_xyz;
        provenance.push_back({{"pair", index},
                              {"provenance", f.provenance},
                              {"variants_fooled", f.variants_fooled},
                              {"fwl3_distinguishes", f.fwl3_distinguishes}});
        ++index;
      }
      std::ofstream(pairs_dir + "/provenance.json") << provenance.dump(2) << "\n";
    }
    std::cerr << "tested " << report.pairs_tested << " pairs, constructed "
              << report.candidates_constructed << " candidates, found "
              << report.found_total << " counterexample hits ("
              << report.found.size() << " distinct)\n";
    if (report.budget_exhausted && report.pairs_tested == 0) {
      std::cerr << "budget exhausted before any pair was tested\n";
      return kExitEngine;
    }
    return 0;
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return exit_code_for(e, kExitEngine);
  }
}

int cmd_grouping(const std::string& cloud_path, const std::string& root_spec,
                 long long budget, double eps, const std::string& out_path) {
  const Tolerance tol{eps};
  PointCloud cloud;
  try {
    cloud = load_xyz(cloud_path);
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return kExitParse;
  }
  try {
    const Transcript t = refine_to_stable(cloud, Variant{3, Flavor::WL}, tol);
    ColorId root_color;
    if (root_spec.empty() || root_spec == "auto") {
      root_color = select_root(t).color;
    } else {
      int a, b, c;
      if (std::sscanf(root_spec.c_str(), "%d,%d,%d", &a, &b, &c) != 3)
        throw Error(ErrorCode::ParseError, "root selector must be 'auto' or 'a,b,c'");
      root_color = t.coloring[t.rounds][tuple_index({a, b, c}, t.n)];
    }
    const NERows rows = build_rows(t, root_color);
    const GroupingEnumeration e = enumerate_groupings(rows, budget);

    // Real apex triples from a concrete tuple of the root class.
    std::vector<std::array<Tick, 3>> real;
    {
      const DistanceMatrix d = distance_matrix(cloud, tol);
      bool found = false;
      for (int a = 0; a < t.n && !found; ++a)
        for (int b = 0; b < t.n && !found; ++b)
          for (int c = 0; c < t.n && !found; ++c) {
            if (a == b || b == c || a == c) continue;
            if (t.coloring[t.rounds][tuple_index({a, b, c}, t.n)] == root_color) {
              real = real_apex_triples(d, a, b, c);
              found = true;
            }
          }
    }

    nlohmann::json report;
    report["root_signature"] = init_signature_of(t, t.rounds, root_color);
    report["common_edges"] = rows.ce;
    report["row_size"] = rows.width();
    report["feasible_groupings"] = e.groupings.size();
    report["infeasible_combinations"] = e.infeasible_combinations;
    report["budget_exhausted"] = e.budget_exhausted;
    report["enumeration_visited"] = e.visited;

    nlohmann::json findings = nlohmann::json::array();
    long long new_tetra_total = 0;
    for (std::size_t gi = 0; gi < e.groupings.size(); ++gi) {
      const TetraComparison cmp = compare_tetrahedra(e.groupings[gi], rows, real, tol);
      if (!cmp.new_tetrahedra.empty()) {
        nlohmann::json item;
        item["grouping_index"] = gi;
        item["new_tetrahedra"] = cmp.new_tetrahedra;
        findings.push_back(std::move(item));
        new_tetra_total += static_cast<long long>(cmp.new_tetrahedra.size());
      }
    }
    report["new_tetrahedron_findings"] = std::move(findings);
    report["new_tetrahedra_total"] = new_tetra_total;
    write_output(report.dump(2), out_path);
    std::cerr << "groupings: " << e.groupings.size() << " feasible, "
              << e.infeasible_combinations << " infeasible combinations, new tetrahedra: "
              << new_tetra_total << "\n";
    return 0;
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return exit_code_for(e, kExitEngine);
  }
}

int cmd_tricks(const std::string& cloud_path, double eps, const std::string& out_path) {
  const Tolerance tol{eps};
  PointCloud cloud;
  try {
    cloud = load_xyz(cloud_path);
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return kExitParse;
  }
  try {
    const Transcript t = refine_to_stable(cloud, Variant{3, Flavor::FWL}, tol);
    const RootSelection root = select_root(t);

    // Find a realized tuple of the class to unroll from.
    std::vector<int> tuple;
    for (int a = 0; a < t.n && tuple.empty(); ++a)
      for (int b = 0; b < t.n && tuple.empty(); ++b)
        for (int c = 0; c < t.n && tuple.empty(); ++c) {
          if (a == b || b == c || a == c) continue;
          if (t.coloring[t.rounds][tuple_index({a, b, c}, t.n)] == root.color)
            tuple = {a, b, c};
        }
    const WLTree tree = unroll_tree(t, tuple, 1);
    const auto ce = identify_common_edges(tree);
    const NeighborFaces faces = extract_new_edges(tree, ce);

    nlohmann::json report;
    report["root_signature"] = root.base_signature;
    report["common_edges"] = {ce[0].ce_length, ce[1].ce_length, ce[2].ce_length};
    std::array<long, 3> histogram{0, 0, 0};
    nlohmann::json externals = nlohmann::json::array();
    for (const NeighborFacesEntry& entry : faces.externals) {
      const int c = classify_ne_case(entry.ne_pairs);
      const ApexDistances apex = resolve_apex_distances(entry);
      ++histogram[c - 1];
      externals.push_back({{"case", c},
                           {"ne_pairs", entry.ne_pairs},
                           {"apex", {apex.r_a, apex.r_b, apex.r_c}}});
    }
    report["case_histogram"] = histogram;
    report["externals"] = std::move(externals);
    write_output(report.dump(2), out_path);
    return 0;
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return exit_code_for(e, kExitEngine);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"k-WL refinement, reconstruction and counterexample search on 3D point clouds"};
  app.require_subcommand(1);

  std::string cloud_path, other_path, transcript_path, out_path, out_xyz, out_cert;
  std::string variant_name = "3fwl";
  std::string variants_spec = "2wl,2fwl,3wl,3fwl";
  std::string config_path, family_arg, pairs_dir, root_spec = "auto";
  double eps = 1e-6;
  int trials = -1;
  int jobs = 0;
  long long budget = -1;
  std::uint64_t seed = 0;

  auto* refine = app.add_subcommand("refine", "refine a cloud and emit a transcript");
  refine->add_option("cloud", cloud_path, "input .xyz file")->required();
  refine->add_option("--variant", variant_name, "2wl|2fwl|3wl|3fwl");
  refine->add_option("--eps", eps, "length resolution");
  refine->add_option("--out", out_path, "transcript JSON path");

  auto* compare = app.add_subcommand("compare", "compare two clouds per variant");
  compare->add_option("a", cloud_path, "first .xyz")->required();
  compare->add_option("b", other_path, "second .xyz")->required();
  compare->add_option("--variants", variants_spec, "comma-separated variant list");
  compare->add_option("--eps", eps, "length resolution");
  compare->add_option("--out", out_path, "verdict JSON path");

  auto* reconstruct_cmd = app.add_subcommand("reconstruct", "rebuild a cloud from a transcript");
  reconstruct_cmd->add_option("transcript", transcript_path, "transcript JSON")->required();
  reconstruct_cmd->add_option("--eps", eps, "length resolution");
  reconstruct_cmd->add_option("--out-xyz", out_xyz, "output cloud path");
  reconstruct_cmd->add_option("--out-cert", out_cert, "certificate JSON path");

  auto* search = app.add_subcommand("search", "run a counterexample campaign");
  search->add_option("--config", config_path, "SearchConfig JSON file");
  search->add_option("--family", family_arg, "random|lattice|symmetric|exchange");
  search->add_option("--trials", trials, "pairs or base clouds");
  search->add_option("--budget", budget, "construction budget");
  search->add_option("--seed", seed, "campaign seed");
  search->add_option("--jobs", jobs, "worker threads for pair trials");
  search->add_option("--eps", eps, "length resolution");
  search->add_option("--out", out_path, "report JSON path");
  search->add_option("--emit-pairs", pairs_dir, "directory for found pair XYZ files");

  auto* grouping = app.add_subcommand("grouping", "3-WL edge-equality grouping analysis");
  grouping->add_option("cloud", cloud_path, "input .xyz file")->required();
  grouping->add_option("--root", root_spec, "'auto' or explicit tuple a,b,c");
  grouping->add_option("--budget", budget, "enumeration budget");
  grouping->add_option("--eps", eps, "length resolution");
  grouping->add_option("--out", out_path, "report JSON path");

  auto* tricks = app.add_subcommand("tricks", "turn-over case and common-edge statistics");
  tricks->add_option("cloud", cloud_path, "input .xyz file")->required();
  tricks->add_option("--eps", eps, "length resolution");
  tricks->add_option("--out", out_path, "report JSON path");

  CLI11_PARSE(app, argc, argv);

  if (refine->parsed()) return cmd_refine(cloud_path, variant_name, eps, out_path);
  if (compare->parsed()) return cmd_compare(cloud_path, other_path, variants_spec, eps, out_path);
  if (reconstruct_cmd->parsed()) return cmd_reconstruct(transcript_path, eps, out_xyz, out_cert);
  if (search->parsed())
    return cmd_search(config_path, family_arg, trials, budget, seed, eps, jobs, out_path,
                      pairs_dir);
  if (grouping->parsed())
    return cmd_grouping(cloud_path, root_spec, budget < 0 ? 1000000 : budget, eps, out_path);
  if (tricks->parsed()) return cmd_tricks(cloud_path, eps, out_path);
  return kExitParse;
}
