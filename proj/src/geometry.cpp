#include "wl3d/geometry.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

namespace wl3d {

namespace {

std::vector<Tick> quantize_points(const std::vector<Vec3>& pts, double eps) {
  const int n = static_cast<int>(pts.size());
  double diam = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      diam = std::max(diam, stable_distance(pts[i], pts[j]));
  const double scale = (diam > 0.0) ? diam : 1.0;

  std::vector<Tick> ticks(static_cast<std::size_t>(n) * n, 0);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double d = stable_distance(pts[i], pts[j]);
      const Tick t = static_cast<Tick>(std::llround(d / (scale * eps)));
      ticks[static_cast<std::size_t>(i) * n + j] = t;
      ticks[static_cast<std::size_t>(j) * n + i] = t;
    }
  }
  return ticks;
}

std::vector<std::vector<Tick>> node_profiles(const DistanceMatrix& d) {
  std::vector<std::vector<Tick>> profiles(d.n);
  for (int i = 0; i < d.n; ++i) {
    profiles[i].reserve(d.n - 1);
    for (int j = 0; j < d.n; ++j)
      if (j != i) profiles[i].push_back(d.at(i, j));
    std::sort(profiles[i].begin(), profiles[i].end());
  }
  return profiles;
}

bool extend_mapping(const DistanceMatrix& da, const DistanceMatrix& db,
                    const std::vector<std::vector<Tick>>& pa,
                    const std::vector<std::vector<Tick>>& pb, std::vector<int>& perm,
                    std::vector<bool>& used, int depth) {
  const int n = da.n;
  if (depth == n) return true;
  for (int j = 0; j < n; ++j) {
    if (used[j] || pa[depth] != pb[j]) continue;
    bool ok = true;
    for (int k = 0; k < depth && ok; ++k)
      ok = da.at(depth, k) == db.at(j, perm[k]);
    if (!ok) continue;
    perm[depth] = j;
    used[j] = true;
    if (extend_mapping(da, db, pa, pb, perm, used, depth + 1)) return true;
    used[j] = false;
  }
  return false;
}

}  // namespace

double stable_distance(const Vec3& a, const Vec3& b) {
  double s[3] = {(a.x() - b.x()) * (a.x() - b.x()), (a.y() - b.y()) * (a.y() - b.y()),
                 (a.z() - b.z()) * (a.z() - b.z())};
  // Smallest-first summation; bit-identical under axis permutation/reflection.
  std::sort(s, s + 3);
  return std::sqrt((s[0] + s[1]) + s[2]);
}

double cloud_diameter(const PointCloud& cloud) {
  double diam = 0.0;
  for (int i = 0; i < cloud.n(); ++i)
    for (int j = i + 1; j < cloud.n(); ++j)
      diam = std::max(diam, stable_distance(cloud.points[i], cloud.points[j]));
  return diam;
}

PointCloud parse_xyz(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::ParseError, "empty xyz input");
  long n = 0;
  try {
    std::size_t pos = 0;
    n = std::stol(line, &pos);
    while (pos < line.size() && std::isspace(static_cast<unsigned char>(line[pos]))) ++pos;
    if (pos != line.size()) throw std::invalid_argument("trailing");
  } catch (const std::exception&) {
    throw Error(ErrorCode::ParseError, "first line must be the point count");
  }
  if (n < 1) throw Error(ErrorCode::ParseError, "point count must be at least 1");
  if (!std::getline(in, line)) throw Error(ErrorCode::ParseError, "missing comment line");

  PointCloud cloud;
  cloud.points.reserve(static_cast<std::size_t>(n));
  for (long i = 0; i < n; ++i) {
    if (!std::getline(in, line))
      throw Error(ErrorCode::ParseError, "expected " + std::to_string(n) + " coordinate lines");
    std::istringstream row(line);
    double x, y, z;
    if (!(row >> x >> y >> z))
      throw Error(ErrorCode::ParseError, "line " + std::to_string(i + 3) + ": need 3 coordinates");
    std::string extra;
    if (row >> extra)
      throw Error(ErrorCode::ParseError, "line " + std::to_string(i + 3) + ": trailing tokens");
    if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(z))
      throw Error(ErrorCode::ParseError, "non-finite coordinate at line " + std::to_string(i + 3));
    cloud.points.emplace_back(x, y, z);
  }
  while (std::getline(in, line)) {
    if (!line.empty() && line.find_first_not_of(" \t\r") != std::string::npos)
      throw Error(ErrorCode::ParseError, "unexpected content after coordinate lines");
  }
  return cloud;
}

PointCloud load_xyz(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorCode::ParseError, "cannot open " + path);
  std::ostringstream buf;
  buf << f.rdbuf();
  return parse_xyz(buf.str());
}

std::string format_xyz(const PointCloud& cloud, const std::string& comment) {
  std::ostringstream out;
  out.precision(17);
  out << cloud.n() << "\n" << comment << "\n";
  for (const Vec3& p : cloud.points) out << p.x() << " " << p.y() << " " << p.z() << "\n";
  return out.str();
}

void save_xyz(const PointCloud& cloud, const std::string& path, const std::string& comment) {
  std::ofstream f(path);
  if (!f) throw Error(ErrorCode::ParseError, "cannot open " + path + " for writing");
  f << format_xyz(cloud, comment);
}

void validate_cloud(const PointCloud& cloud, const Tolerance& tol) {
  // Ticks are compared and interned as 32-bit color ids downstream.
  if (!(tol.epsilon > 0.0) || !(tol.epsilon < 1.0) || tol.unit_ticks() > 2000000000LL)
    throw Error(ErrorCode::ParseError, "epsilon must lie in (5e-10, 1)");
  if (cloud.n() < 1) throw Error(ErrorCode::ParseError, "cloud must contain at least one point");
  for (const Vec3& p : cloud.points)
    if (!p.allFinite()) throw Error(ErrorCode::ParseError, "non-finite coordinate");
  const double diam = cloud_diameter(cloud);
  if (cloud.n() >= 2 && diam <= 0.0)
    throw Error(ErrorCode::DuplicatePoints, "all points coincide");
  for (int i = 0; i < cloud.n(); ++i)
    for (int j = i + 1; j < cloud.n(); ++j)
      if (stable_distance(cloud.points[i], cloud.points[j]) < tol.epsilon * diam)
        throw Error(ErrorCode::DuplicatePoints,
                    "points " + std::to_string(i) + " and " + std::to_string(j) + " coincide");
}

DistanceMatrix distance_matrix(const PointCloud& cloud, const Tolerance& tol) {
  validate_cloud(cloud, tol);
  DistanceMatrix d;
  d.n = cloud.n();
  d.ticks = quantize_points(cloud.points, tol.epsilon);
  for (int i = 0; i < d.n; ++i)
    for (int j = i + 1; j < d.n; ++j)
      if (d.at(i, j) == 0)
        throw Error(ErrorCode::DuplicatePoints, "off-diagonal distance quantizes to zero");
  return d;
}

std::optional<CongruenceWitness> congruent(const PointCloud& a, const PointCloud& b,
                                           const Tolerance& tol) {
  if (a.n() != b.n())
    throw Error(ErrorCode::SizeMismatch,
                std::to_string(a.n()) + " vs " + std::to_string(b.n()) + " points");
  if (a.n() > 10)
    throw Error(ErrorCode::TooLargeForExhaustive, "exhaustive congruence capped at n = 10");

  const DistanceMatrix da = distance_matrix(a, tol);
  const DistanceMatrix db = distance_matrix(b, tol);
  const auto pa = node_profiles(da);
  const auto pb = node_profiles(db);

  {
    auto sa = pa;
    auto sb = pb;
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    if (sa != sb) return std::nullopt;
  }

  std::vector<int> perm(a.n(), -1);
  std::vector<bool> used(a.n(), false);
  if (!extend_mapping(da, db, pa, pb, perm, used, 0)) return std::nullopt;

  const double diam_a = (a.n() >= 2) ? cloud_diameter(a) : 1.0;
  const double diam_b = (b.n() >= 2) ? cloud_diameter(b) : 1.0;
  double residual = 0.0;
  for (int i = 0; i < a.n(); ++i) {
    for (int j = i + 1; j < a.n(); ++j) {
      const double du = stable_distance(a.points[i], a.points[j]) / diam_a;
      const double dv = stable_distance(b.points[perm[i]], b.points[perm[j]]) / diam_b;
      residual = std::max(residual, std::abs(du - dv));
    }
  }
  return CongruenceWitness{perm, residual};
}

namespace detail {

TriParts trilaterate_parts(const Vec3& p_a, const Vec3& p_b, const Vec3& p_c, double r_a,
                           double r_b, double r_c, const Tolerance& tol) {
  const Vec3 ab = p_b - p_a;
  const Vec3 ac = p_c - p_a;
  const double d = ab.norm();
  const double local = std::max({d, ac.norm(), (p_c - p_b).norm()});
  const double area = 0.5 * ab.cross(ac).norm();
  if (area < tol.epsilon * local * local)
    throw Error(ErrorCode::CollinearBase, "base triangle is degenerate");

  const Vec3 ex = ab / d;
  const double i = ex.dot(ac);
  const Vec3 ey = (ac - i * ex).normalized();
  const double j = ey.dot(ac);

  const double x = (r_a * r_a - r_b * r_b + d * d) / (2.0 * d);
  const double y = (r_a * r_a - r_c * r_c + i * i + j * j - 2.0 * i * x) / (2.0 * j);

  TriParts parts;
  parts.base = p_a + x * ex + y * ey;
  parts.ez = ex.cross(ey);
  parts.z2 = r_a * r_a - x * x - y * y;
  parts.scale = std::max({local, r_a, r_b, r_c});
  parts.height_min = 2.0 * area / local;
  return parts;
}

}  // namespace detail

std::vector<Vec3> trilaterate(const Vec3& p_a, const Vec3& p_b, const Vec3& p_c,
                              double r_a, double r_b, double r_c, const Tolerance& tol) {
  const detail::TriParts parts = detail::trilaterate_parts(p_a, p_b, p_c, r_a, r_b, r_c, tol);

  // Exact-arithmetic semantics with an eps-level allowance: a mildly
  // negative z^2 still denotes an apex on the base plane, and the two
  // mirror solutions merge when closer than 2 eps.
  const double plane_slack = 4.0 * tol.epsilon * parts.scale * parts.scale;

  std::vector<Vec3> out;
  if (parts.z2 < -plane_slack) return out;
  if (parts.z2 <= 0.0) {
    out.push_back(parts.base);
    return out;
  }
  const double z = std::sqrt(parts.z2);
  if (2.0 * z < 2.0 * tol.epsilon * std::max(1.0, parts.scale)) {
    out.push_back(parts.base);
    return out;
  }
  out.push_back(parts.base + z * parts.ez);
  out.push_back(parts.base - z * parts.ez);
  return out;
}

namespace {

Eigen::MatrixXd gram_from_ticks(const DistanceMatrix& d, double eps) {
  const int n = d.n;
  Eigen::MatrixXd sq(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double len = static_cast<double>(d.at(i, j)) * eps;
      sq(i, j) = len * len;
    }
  const Eigen::MatrixXd centering =
      Eigen::MatrixXd::Identity(n, n) - Eigen::MatrixXd::Constant(n, n, 1.0 / n);
  return -0.5 * centering * sq * centering;
}

}  // namespace

bool edm_realizable_3d(const DistanceMatrix& d, const Tolerance& tol) {
  const int n = d.n;
  if (n <= 1) return true;
  const Eigen::MatrixXd gram = gram_from_ticks(d, tol.epsilon);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(gram, Eigen::EigenvaluesOnly);
  const Eigen::VectorXd ev = solver.eigenvalues();
  const double lambda_max = std::max(ev.cwiseAbs().maxCoeff(), 1e-300);
  const double thresh = std::max(1e-9, 64.0 * n * tol.epsilon) * lambda_max;
  int rank = 0;
  for (int i = 0; i < n; ++i) {
    if (ev(i) < -thresh) return false;
    if (ev(i) > thresh) ++rank;
  }
  return rank <= 3;
}

PointCloud embed_3d(const DistanceMatrix& d, const Tolerance& tol) {
  if (!edm_realizable_3d(d, tol))
    throw Error(ErrorCode::NotRealizable, "distance matrix is not realizable in 3D");
  const int n = d.n;
  PointCloud cloud;
  if (n == 1) {
    cloud.points.emplace_back(0, 0, 0);
    return cloud;
  }
  Tick max_tick = 0;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) max_tick = std::max(max_tick, d.at(i, j));
  if (max_tick != tol.unit_ticks())
    throw Error(ErrorCode::NotRealizable,
                "distance matrix is not normalized to unit diameter");

  const Eigen::MatrixXd gram = gram_from_ticks(d, tol.epsilon);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(gram);
  const Eigen::VectorXd ev = solver.eigenvalues();
  Eigen::MatrixXd coords = Eigen::MatrixXd::Zero(n, 3);
  for (int k = 0; k < 3 && k < n; ++k) {
    const int idx = n - 1 - k;  // Eigen sorts ascending
    const double lambda = std::max(ev(idx), 0.0);
    coords.col(k) = solver.eigenvectors().col(idx) * std::sqrt(lambda);
  }

  cloud.points.resize(n);
  for (int i = 0; i < n; ++i) cloud.points[i] = coords.row(i).transpose();
  if (!detail::polish_to_ticks(cloud.points, d.ticks, n, tol))
    throw Error(ErrorCode::NotRealizable, "no embedding reproduces the quantized matrix");
  return cloud;
}

double cayley_menger_4(double ab2, double ac2, double ad2, double bc2, double bd2,
                       double cd2) {
  Eigen::Matrix<double, 5, 5> m;
  m << 0, 1, 1, 1, 1,
       1, 0, ab2, ac2, ad2,
       1, ab2, 0, bc2, bd2,
       1, ac2, bc2, 0, cd2,
       1, ad2, bd2, cd2, 0;
  return m.determinant();
}

double superposition_residual(const PointCloud& a, const PointCloud& b,
                              const std::vector<int>& permutation) {
  const int n = a.n();
  if (b.n() != n || static_cast<int>(permutation.size()) != n)
    throw Error(ErrorCode::SizeMismatch, "superposition inputs disagree on n");
  auto pa = detail::normalized_copy(a);
  auto pb = detail::normalized_copy(b);

  Vec3 ca = Vec3::Zero(), cb = Vec3::Zero();
  for (int i = 0; i < n; ++i) {
    ca += pa[i];
    cb += pb[permutation[i]];
  }
  ca /= n;
  cb /= n;

  Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
  for (int i = 0; i < n; ++i) h += (pa[i] - ca) * (pb[permutation[i]] - cb).transpose();
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  // Orthogonal Procrustes with reflection allowed: R = V U^T.
  const Eigen::Matrix3d rot = svd.matrixV() * svd.matrixU().transpose();

  double residual = 0.0;
  for (int i = 0; i < n; ++i)
    residual = std::max(residual, (rot * (pa[i] - ca) - (pb[permutation[i]] - cb)).norm());
  return residual;
}

namespace detail {

std::vector<Vec3> normalized_copy(const PointCloud& cloud) {
  std::vector<Vec3> pts = cloud.points;
  const double diam = cloud_diameter(cloud);
  if (diam > 0.0)
    for (Vec3& p : pts) p /= diam;
  return pts;
}

bool polish_to_ticks(std::vector<Vec3>& points, const std::vector<Tick>& target, int n,
                     const Tolerance& tol) {
  if (n < 2) return true;
  const double eps = tol.epsilon;

  struct Pair {
    int i, j;
    Tick tick;
  };
  std::vector<Pair> pairs;
  pairs.reserve(static_cast<std::size_t>(n) * (n - 1) / 2);
  Tick unit = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const Tick t = target[static_cast<std::size_t>(i) * n + j];
      if (t <= 0) return false;
      pairs.push_back({i, j, t});
      unit = std::max(unit, t);
    }
  }
  const int m = static_cast<int>(pairs.size());
  const int vars = 3 * n;

  // At tick scale the corrections are ~1e-6 of the geometry, so the
  // quantization constraints are linear for all practical purposes: one
  // linearization plus an exactly-solved convex hinge problem (Newton with
  // backtracking) lands every renormalized distance inside its tick bin.
  // The renormalization itself is part of the linear model: moving the
  // diameter pair rescales every other offset proportionally.
  for (int outer = 0; outer < 6; ++outer) {
    double diam = 0.0;
    for (const Pair& p : pairs) diam = std::max(diam, stable_distance(points[p.i], points[p.j]));
    if (!(diam > 0.0)) return false;
    for (Vec3& v : points) v /= diam;

    std::vector<double> off(m);
    bool good = true;
    int diameter_row = 0;
    double longest = 0.0;
    for (int k = 0; k < m; ++k) {
      const double len = stable_distance(points[pairs[k].i], points[pairs[k].j]);
      off[k] = len / eps - static_cast<double>(pairs[k].tick);
      if (std::llround(len / eps) != pairs[k].tick) good = false;
      if (len > longest) {
        longest = len;
        diameter_row = k;
      }
    }
    if (good) return quantize_points(points, eps) == target;

    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(m, vars);
    for (int k = 0; k < m; ++k) {
      const Vec3 u = (points[pairs[k].i] - points[pairs[k].j]).normalized();
      for (int c = 0; c < 3; ++c) {
        a(k, 3 * pairs[k].i + c) += u(c);
        a(k, 3 * pairs[k].j + c) -= u(c);
      }
    }
    const Eigen::RowVectorXd diameter_grad = a.row(diameter_row);
    for (int k = 0; k < m; ++k)
      a.row(k) -= (static_cast<double>(pairs[k].tick) / static_cast<double>(unit)) * diameter_grad;

    const Eigen::VectorXd o = Eigen::Map<Eigen::VectorXd>(off.data(), m);
    Eigen::VectorXd z = Eigen::VectorXd::Zero(vars);
    const double mu = 1e-9;
    // Pairs tied at the unit tick may never exceed the chosen diameter row,
    // or the renormalization linearization flips mid-solve; their bins are
    // one-sided.
    std::vector<char> capped(m, 0);
    for (int k = 0; k < m; ++k)
      capped[k] = (pairs[k].tick == unit && k != diameter_row) ? 1 : 0;
    // |offset| <= margin is the enforced bound; escalate toward the bin
    // boundary only when a cloud's feasible offsets genuinely need it.
    const double margins[] = {0.45,    0.48,     0.49,     0.495,    0.498,
                              0.4995,  0.4999,   0.49997,  0.49999,  0.499997,
                              0.499999};
    bool solved = false;
    for (const double margin : margins) {
      for (int it = 0; it < 100 && !solved; ++it) {
        const Eigen::VectorXd v = o + a * z;
        double hinge = 0.0;
        Eigen::VectorXd grad = 2.0 * mu * z;
        Eigen::MatrixXd hess = 2.0 * mu * Eigen::MatrixXd::Identity(vars, vars);
        for (int k = 0; k < m; ++k) {
          const double hi = capped[k] ? 0.0 : margin;
          double e = 0.0, sign = 0.0;
          if (v(k) > hi) {
            e = v(k) - hi;
            sign = 1.0;
          } else if (v(k) < -margin) {
            e = -margin - v(k);
            sign = -1.0;
          }
          if (e > 0.0) {
            hinge += e * e;
            grad += 2.0 * sign * e * a.row(k).transpose();
            hess += 2.0 * a.row(k).transpose() * a.row(k);
          }
        }
        if (hinge < 1e-18) {
          solved = true;
          break;
        }
        const Eigen::VectorXd step = hess.ldlt().solve(-grad);
        if (!step.allFinite()) break;
        const double f0 = hinge + mu * z.squaredNorm();
        double t = 1.0;
        for (int bt = 0; bt < 30; ++bt, t *= 0.5) {
          const Eigen::VectorXd z2 = z + t * step;
          const Eigen::VectorXd v2 = o + a * z2;
          double f2 = mu * z2.squaredNorm();
          for (int k = 0; k < m; ++k) {
            const double hi = capped[k] ? 0.0 : margin;
            if (v2(k) > hi) f2 += (v2(k) - hi) * (v2(k) - hi);
            else if (v2(k) < -margin) f2 += (-margin - v2(k)) * (-margin - v2(k));
          }
          if (f2 < f0) {
            z = z2;
            break;
          }
        }
      }
      if (solved) break;
    }
    for (int i = 0; i < n; ++i)
      points[i] += eps * Vec3(z(3 * i), z(3 * i + 1), z(3 * i + 2));
  }

  double diam = 0.0;
  for (const Pair& p : pairs) diam = std::max(diam, stable_distance(points[p.i], points[p.j]));
  if (diam > 0.0)
    for (Vec3& v : points) v /= diam;
  return quantize_points(points, eps) == target;
}

}  // namespace detail

}  // namespace wl3d
