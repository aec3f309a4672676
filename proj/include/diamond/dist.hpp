// Distributions over (posterior-mean) match values: finitely many point masses
// plus piecewise-uniform segments on a bounded interval. The class is closed
// under shifting, mixing and fusion, so every law the market works with can be
// handled in closed form without gridding a CDF.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace diamond {

inline constexpr double kMassTolerance = 1e-12;
inline constexpr double kDefaultMpcTolerance = 1e-9;

struct Atom {
  double x;
  double mass;
};

/// Uniform density mass/(hi - lo) on (lo, hi).
struct Segment {
  double lo;
  double hi;
  double mass;

  double density() const { return mass / (hi - lo); }
};

class ValueDistribution {
 public:
  ValueDistribution(double support_lo, double support_hi, std::vector<Atom> atoms,
                    std::vector<Segment> segments)
      : lo_(support_lo), hi_(support_hi), atoms_(std::move(atoms)), segments_(std::move(segments)) {
    if (!std::isfinite(lo_) || !std::isfinite(hi_) || !(lo_ < hi_))
      throw std::invalid_argument("ValueDistribution: support must satisfy lo < hi");

    double total = 0.0;
    for (const auto& a : atoms_) {
      if (!std::isfinite(a.x) || !std::isfinite(a.mass) || a.mass < 0.0)
        throw std::invalid_argument("ValueDistribution: atom with invalid location or mass");
      if (a.x < lo_ || a.x > hi_)
        throw std::invalid_argument("ValueDistribution: atom at " + std::to_string(a.x) +
                                    " outside support");
      total += a.mass;
    }
    for (const auto& s : segments_) {
      if (!std::isfinite(s.lo) || !std::isfinite(s.hi) || !std::isfinite(s.mass) || s.mass < 0.0)
        throw std::invalid_argument("ValueDistribution: segment with invalid bounds or mass");
      if (!(s.lo < s.hi))
        throw std::invalid_argument("ValueDistribution: segment requires lo < hi");
      if (s.lo < lo_ || s.hi > hi_)
        throw std::invalid_argument("ValueDistribution: segment outside support");
      total += s.mass;
    }
    if (std::abs(total - 1.0) > kMassTolerance)
      throw std::invalid_argument("ValueDistribution: total mass " + std::to_string(total) +
                                  " differs from 1");

    std::erase_if(atoms_, [](const Atom& a) { return a.mass == 0.0; });
    std::erase_if(segments_, [](const Segment& s) { return s.mass == 0.0; });
    std::sort(atoms_.begin(), atoms_.end(), [](const Atom& a, const Atom& b) { return a.x < b.x; });
    std::vector<Atom> merged;
    merged.reserve(atoms_.size());
    for (const auto& a : atoms_) {
      if (!merged.empty() && merged.back().x == a.x)
        merged.back().mass += a.mass;
      else
        merged.push_back(a);
    }
    atoms_ = std::move(merged);
    std::sort(segments_.begin(), segments_.end(), [](const Segment& a, const Segment& b) {
      return a.lo < b.lo || (a.lo == b.lo && a.hi < b.hi);
    });
  }

  static ValueDistribution uniform(double lo = 0.0, double hi = 1.0) {
    return ValueDistribution(lo, hi, {}, {{lo, hi, 1.0}});
  }

  /// Point mass at mu; the "no information" law.
  static ValueDistribution degenerate(double mu, double lo = 0.0, double hi = 1.0) {
    if (mu < lo || mu > hi) throw std::invalid_argument("degenerate: location outside support");
    return ValueDistribution(lo, hi, {{mu, 1.0}}, {});
  }

  static ValueDistribution discrete(std::vector<Atom> atoms, double lo = 0.0, double hi = 1.0) {
    return ValueDistribution(lo, hi, std::move(atoms), {});
  }

  /// Two-point law on {lo, hi} with the given mean.
  static ValueDistribution bernoulli(double mean, double lo = 0.0, double hi = 1.0) {
    const double q = (mean - lo) / (hi - lo);
    if (q < 0.0 || q > 1.0) throw std::invalid_argument("bernoulli: mean outside support");
    return ValueDistribution(lo, hi, {{lo, 1.0 - q}, {hi, q}}, {});
  }

  double support_lo() const { return lo_; }
  double support_hi() const { return hi_; }
  const std::vector<Atom>& atoms() const { return atoms_; }
  const std::vector<Segment>& segments() const { return segments_; }
  bool is_atomic() const { return segments_.empty(); }

  double mean() const {
    double m = 0.0;
    for (const auto& a : atoms_) m += a.mass * a.x;
    for (const auto& s : segments_) m += s.mass * 0.5 * (s.lo + s.hi);
    return m;
  }

  /// E[max(X - t, 0)].
  double expected_excess(double t) const {
    double e = 0.0;
    for (const auto& a : atoms_)
      if (a.x > t) e += a.mass * (a.x - t);
    for (const auto& s : segments_) {
      if (t <= s.lo) {
        e += s.mass * (0.5 * (s.lo + s.hi) - t);
      } else if (t < s.hi) {
        const double w = s.hi - t;
        e += 0.5 * s.density() * w * w;
      }
    }
    return e;
  }

  /// Right-continuous CDF, P(X <= x).
  double cdf_at(double x) const {
    if (x < lo_) return 0.0;
    if (x >= hi_) return 1.0;
    double f = 0.0;
    for (const auto& a : atoms_) {
      if (a.x > x) break;
      f += a.mass;
    }
    for (const auto& s : segments_) f += s.mass * segment_fraction(s, x);
    return std::clamp(f, 0.0, 1.0);
  }

  /// P(X < x).
  double cdf_left(double x) const {
    if (x <= lo_) return 0.0;
    if (x > hi_) return 1.0;
    double f = 0.0;
    for (const auto& a : atoms_) {
      if (a.x >= x) break;
      f += a.mass;
    }
    for (const auto& s : segments_) f += s.mass * segment_fraction(s, x);
    return std::clamp(f, 0.0, 1.0);
  }

  /// P(X >= t).
  double survival(double t) const { return 1.0 - cdf_left(t); }

  double atom_mass_at(double x) const {
    auto it = std::lower_bound(atoms_.begin(), atoms_.end(), x,
                               [](const Atom& a, double v) { return a.x < v; });
    return (it != atoms_.end() && it->x == x) ? it->mass : 0.0;
  }

  /// Total segment density at x (segments are open intervals).
  double density_at(double x) const {
    double d = 0.0;
    for (const auto& s : segments_)
      if (s.lo < x && x < s.hi) d += s.density();
    return d;
  }

  /// Integral of the CDF from support_lo to t, i.e. E[max(t - X, 0)].
  double integrated_cdf(double t) const { return (t - mean()) + expected_excess(t); }

  /// Smallest and largest points carrying mass.
  double min_point() const {
    double m = std::numeric_limits<double>::infinity();
    if (!atoms_.empty()) m = atoms_.front().x;
    for (const auto& s : segments_) m = std::min(m, s.lo);
    return m;
  }
  double max_point() const {
    double m = -std::numeric_limits<double>::infinity();
    if (!atoms_.empty()) m = atoms_.back().x;
    for (const auto& s : segments_) m = std::max(m, s.hi);
    return m;
  }

  /// Sorted, deduplicated atom locations and segment endpoints.
  std::vector<double> breakpoints() const {
    std::vector<double> b;
    b.reserve(atoms_.size() + 2 * segments_.size());
    for (const auto& a : atoms_) b.push_back(a.x);
    for (const auto& s : segments_) {
      b.push_back(s.lo);
      b.push_back(s.hi);
    }
    std::sort(b.begin(), b.end());
    b.erase(std::unique(b.begin(), b.end()), b.end());
    return b;
  }

  /// Same law translated by delta, re-housed on [lo, hi].
  ValueDistribution shifted(double delta, double lo, double hi) const {
    std::vector<Atom> atoms;
    atoms.reserve(atoms_.size());
    for (const auto& a : atoms_) atoms.push_back({a.x + delta, a.mass});
    std::vector<Segment> segs;
    segs.reserve(segments_.size());
    for (const auto& s : segments_) segs.push_back({s.lo + delta, s.hi + delta, s.mass});
    return ValueDistribution(lo, hi, std::move(atoms), std::move(segs));
  }

  friend bool operator==(const ValueDistribution& a, const ValueDistribution& b) {
    auto atom_eq = [](const Atom& x, const Atom& y) { return x.x == y.x && x.mass == y.mass; };
    auto seg_eq = [](const Segment& x, const Segment& y) {
      return x.lo == y.lo && x.hi == y.hi && x.mass == y.mass;
    };
    return a.lo_ == b.lo_ && a.hi_ == b.hi_ &&
           std::equal(a.atoms_.begin(), a.atoms_.end(), b.atoms_.begin(), b.atoms_.end(), atom_eq) &&
           std::equal(a.segments_.begin(), a.segments_.end(), b.segments_.begin(), b.segments_.end(),
                      seg_eq);
  }

 private:
  static double segment_fraction(const Segment& s, double x) {
    if (x <= s.lo) return 0.0;
    if (x >= s.hi) return 1.0;
    return (x - s.lo) / (s.hi - s.lo);
  }

  double lo_;
  double hi_;
  std::vector<Atom> atoms_;
  std::vector<Segment> segments_;
};

inline ValueDistribution degenerate(double mu, double lo = 0.0, double hi = 1.0) {
  return ValueDistribution::degenerate(mu, lo, hi);
}

inline double mean(const ValueDistribution& f) { return f.mean(); }
inline double expected_excess(const ValueDistribution& f, double t) { return f.expected_excess(t); }
inline double cdf_at(const ValueDistribution& f, double x) { return f.cdf_at(x); }

/// Weighted mixture of laws, housed on [lo, hi]. Weights must sum to 1.
inline ValueDistribution mixture(const std::vector<std::pair<double, ValueDistribution>>& parts,
                                 double lo, double hi) {
  std::vector<Atom> atoms;
  std::vector<Segment> segs;
  for (const auto& [w, f] : parts) {
    if (w < 0.0) throw std::invalid_argument("mixture: negative weight");
    for (const auto& a : f.atoms()) atoms.push_back({a.x, w * a.mass});
    for (const auto& s : f.segments()) segs.push_back({s.lo, s.hi, w * s.mass});
  }
  return ValueDistribution(lo, hi, std::move(atoms), std::move(segs));
}

/// Convex-order test: true iff `f` is a mean-preserving contraction of `g`.
///
/// With equal means, f is a contraction of g iff E_f[(X - t)^+] <= E_g[(X - t)^+]
/// for every t. Both sides are piecewise quadratic with knots at the union of
/// breakpoints, so the difference is checked at every knot and at the interior
/// vertex of each concave piece.
inline bool is_mpc(const ValueDistribution& f, const ValueDistribution& g,
                   double tol = kDefaultMpcTolerance) {
  if (f.support_lo() != g.support_lo() || f.support_hi() != g.support_hi())
    throw std::invalid_argument("is_mpc: distributions live on different support intervals");
  if (std::abs(f.mean() - g.mean()) > tol) return false;

  auto diff = [&](double t) { return f.expected_excess(t) - g.expected_excess(t); };

  std::vector<double> knots = f.breakpoints();
  const auto gk = g.breakpoints();
  knots.insert(knots.end(), gk.begin(), gk.end());
  knots.push_back(f.support_lo());
  knots.push_back(f.support_hi());
  std::sort(knots.begin(), knots.end());
  knots.erase(std::unique(knots.begin(), knots.end()), knots.end());

  for (double t : knots)
    if (diff(t) > tol) return false;

  for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
    const double a = knots[i];
    const double b = knots[i + 1];
    const double mid = 0.5 * (a + b);
    // On (a, b): diff''(t) = density_f - density_g, diff'(a+) = F_f(a) - F_g(a).
    const double curvature = f.density_at(mid) - g.density_at(mid);
    if (curvature >= 0.0) continue;
    const double slope = f.cdf_at(a) - g.cdf_at(a);
    const double vertex = a - slope / curvature;
    if (vertex > a && vertex < b && diff(vertex) > tol) return false;
  }
  return true;
}

/// Take `fraction` of the mass lying in the closed interval [lo, hi].
struct FusionRegion {
  double lo;
  double hi;
  double fraction;
};

/// Regions are pairwise disjoint up to shared endpoints; an atom sitting on a
/// shared endpoint belongs to the leftmost region containing it.
struct FusionSpec {
  std::vector<FusionRegion> regions;
};

/// Removes the sub-measure selected by `spec` and puts it back as a single atom
/// at its barycenter. The result is always a mean-preserving contraction of f.
inline ValueDistribution fuse(const ValueDistribution& f, const FusionSpec& spec) {
  std::vector<FusionRegion> regions = spec.regions;
  for (const auto& r : regions) {
    if (!(r.lo <= r.hi)) throw std::invalid_argument("fuse: region requires lo <= hi");
    if (r.lo < f.support_lo() || r.hi > f.support_hi())
      throw std::invalid_argument("fuse: region outside support");
    if (!(r.fraction >= 0.0 && r.fraction <= 1.0))
      throw std::invalid_argument("fuse: fraction must lie in [0, 1]");
  }
  std::sort(regions.begin(), regions.end(),
            [](const FusionRegion& a, const FusionRegion& b) { return a.lo < b.lo; });
  for (std::size_t i = 0; i + 1 < regions.size(); ++i)
    if (regions[i].hi > regions[i + 1].lo)
      throw std::invalid_argument("fuse: regions overlap");

  auto region_fraction = [&](double x) {
    for (const auto& r : regions)
      if (r.lo <= x && x <= r.hi) return r.fraction;
    return 0.0;
  };

  // Barycenter accumulated relative to the first collected location so that
  // collecting a single point returns that point exactly.
  double collected = 0.0;
  double moment = 0.0;
  bool have_ref = false;
  double ref = 0.0;
  auto collect = [&](double mass, double x) {
    if (mass <= 0.0) return;
    if (!have_ref) {
      ref = x;
      have_ref = true;
    }
    collected += mass;
    moment += mass * (x - ref);
  };

  std::vector<Atom> atoms;
  for (const auto& a : f.atoms()) {
    const double frac = region_fraction(a.x);
    collect(frac * a.mass, a.x);
    if (frac < 1.0) atoms.push_back({a.x, (1.0 - frac) * a.mass});
  }

  std::vector<Segment> segs;
  for (const auto& s : f.segments()) {
    std::vector<double> cuts{s.lo, s.hi};
    for (const auto& r : regions) {
      if (r.lo > s.lo && r.lo < s.hi) cuts.push_back(r.lo);
      if (r.hi > s.lo && r.hi < s.hi) cuts.push_back(r.hi);
    }
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    if (cuts.size() == 2) {
      const double frac = region_fraction(0.5 * (s.lo + s.hi));
      collect(frac * s.mass, 0.5 * (s.lo + s.hi));
      if (frac < 1.0) segs.push_back({s.lo, s.hi, (1.0 - frac) * s.mass});
      continue;
    }
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
      const double u = cuts[i];
      const double v = cuts[i + 1];
      const double piece = s.mass * (v - u) / (s.hi - s.lo);
      const double frac = region_fraction(0.5 * (u + v));
      collect(frac * piece, 0.5 * (u + v));
      if (frac < 1.0) segs.push_back({u, v, (1.0 - frac) * piece});
    }
  }

  if (!(collected > 0.0)) throw std::invalid_argument("fuse: fusion collects zero mass");
  const double bary =
      std::clamp(ref + moment / collected, f.support_lo(), f.support_hi());
  atoms.push_back({bary, collected});
  return ValueDistribution(f.support_lo(), f.support_hi(), std::move(atoms), std::move(segs));
}

/// Inverse-CDF sampler. The quantile table is built once; draws are O(log k).
class Sampler {
 public:
  explicit Sampler(const ValueDistribution& f) {
    points_ = f.breakpoints();
    cdf_left_.resize(points_.size());
    cdf_.resize(points_.size());
    double running = 0.0;
    for (std::size_t j = 0; j < points_.size(); ++j) {
      if (j > 0) running += f.density_at(0.5 * (points_[j - 1] + points_[j])) *
                            (points_[j] - points_[j - 1]);
      cdf_left_[j] = running;
      running += f.atom_mass_at(points_[j]);
      cdf_[j] = running;
    }
  }

  /// Quantile at u in [0, 1).
  double operator()(double u) const {
    auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    if (it == cdf_.end()) return points_.back();
    const auto j = static_cast<std::size_t>(it - cdf_.begin());
    if (j == 0 || u >= cdf_left_[j]) return points_[j];
    const double span = cdf_left_[j] - cdf_[j - 1];
    if (!(span > 0.0)) return points_[j];
    const double t = (u - cdf_[j - 1]) / span;
    return points_[j - 1] + t * (points_[j] - points_[j - 1]);
  }

  bool is_degenerate() const { return points_.size() == 1; }

 private:
  std::vector<double> points_;
  std::vector<double> cdf_left_;
  std::vector<double> cdf_;
};

}  // namespace diamond
