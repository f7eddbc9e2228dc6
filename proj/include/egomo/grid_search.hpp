#pragma once

#include <cstddef>
#include <limits>
#include <ostream>
#include <type_traits>
#include <vector>

#include "egomo/geometry.hpp"
#include "egomo/parallel.hpp"
#include "egomo/sphere_grid.hpp"

namespace egomo {

struct SurfaceSample {
  Vec3 t = Vec3::UnitZ();
  double residual = std::numeric_limits<double>::infinity();
  Vec3 w = Vec3::Zero();
  double tiebreak = 0.0;  // secondary key, compared only on equal residuals

  bool better_than(const SurfaceSample& o) const {
    return residual < o.residual || (residual == o.residual && tiebreak < o.tiebreak);
  }
};

/// Objective over candidate translation axes, with the best rotation found
/// for each candidate.
struct ResidualSurface {
  int level = 0;
  std::vector<SurfaceSample> samples;

  /// First index attaining the minimum residual (ties go to the lower index).
  std::size_t argmin() const {
    std::size_t best = 0;
    for (std::size_t i = 1; i < samples.size(); ++i)
      if (samples[i].better_than(samples[best])) best = i;
    return best;
  }

  const SurfaceSample& best() const { return samples.at(argmin()); }
};

/// Evaluates `eval(t) -> SurfaceSample` at every candidate, in parallel, with
/// results stored by candidate index.
template <typename Eval>
std::vector<SurfaceSample> scan_candidates(const std::vector<Vec3>& candidates, Eval&& eval,
                                           int threads) {
  std::vector<SurfaceSample> out(candidates.size());
  parallel_for(candidates.size(), threads,
               [&](std::size_t i) { out[i] = eval(candidates[i]); });
  return out;
}

inline std::size_t argmin_of(const std::vector<SurfaceSample>& samples) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < samples.size(); ++i)
    if (samples[i].better_than(samples[best])) best = i;
  return best;
}

/// Coarse-to-fine refinement: at each level above `from_level`, rescans the
/// lattice cap of radius 2 * spacing(level - 1) around the incumbent.
/// `eval` takes `(t)` or `(t, incumbent)`; the incumbent is fixed while a
/// cap is scanned, so it may seed the evaluation without breaking determinism.
template <typename Eval>
SurfaceSample cascade_refine(SurfaceSample incumbent, int from_level, int to_level, Eval&& eval,
                             int threads) {
  for (int level = from_level + 1; level <= to_level; ++level) {
    const auto cap = sphere_cap(level, incumbent.t, 2.0 * grid_spacing(level - 1));
    const SurfaceSample seed = incumbent;
    const auto results =
        scan_candidates(cap, [&](const Vec3& t) {
          if constexpr (std::is_invocable_v<Eval&, const Vec3&, const SurfaceSample&>)
            return eval(t, seed);
          else
            return eval(t);
        }, threads);
    const SurfaceSample& best = results[argmin_of(results)];
    if (!incumbent.better_than(best)) incumbent = best;
  }
  return incumbent;
}

/// CSV rows `tx,ty,tz,residual,wx,wy,wz`, preceded by comment lines carrying
/// the schema version and the argmin row index.
inline void write_surface_csv(std::ostream& os, const ResidualSurface& surface) {
  os << "# schema_version: 1\n";
  os << "# argmin_row: " << (surface.samples.empty() ? 0 : surface.argmin()) << "\n";
  os << "tx,ty,tz,residual,wx,wy,wz\n";
  os.precision(17);
  for (const SurfaceSample& s : surface.samples) {
    os << s.t.x() << ',' << s.t.y() << ',' << s.t.z() << ',' << s.residual << ',' << s.w.x()
       << ',' << s.w.y() << ',' << s.w.z() << '\n';
  }
}

}  // namespace egomo
