#pragma once

// Constructed panels shared by the unit and acceptance tests.

#include "gcausal/random.hpp"
#include "gcausal/scm.hpp"

namespace fixtures {

using namespace gcausal;

// Two phases of equal length. Phase one is i.i.d. N(0, I); phase two adds a
// common factor, doubling each variance and setting every correlation to 0.5.
inline time_series_panel variance_shift_panel(Index length, Index n, std::uint64_t seed) {
  rng_t rng = make_rng(seed, 0x7a5e);
  MatrixXd z = standard_normal_matrix(length, n, rng);
  const MatrixXd f = standard_normal_matrix(length, 1, rng);
  for (Index t = length / 2; t < length; ++t) z.row(t).array() += f(t, 0);
  return time_series_panel(std::move(z));
}

// Window index whose span is centered on the change point.
inline double change_window(Index length, Index window, Index stride) {
  return (static_cast<double>(length / 2) - static_cast<double>(window) / 2.0) / static_cast<double>(stride);
}

// Two groups of two variables. With `coupled`, variable 0 drives variable 2
// at lag 1 with coefficient 0.8 (target self-coefficient 0.1 keeps the
// stability guard); otherwise the groups are independent AR(1) blocks.
inline scm_spec two_group_spec(bool coupled) {
  std::vector<scm_edge> edges;
  for (int v = 0; v < 4; ++v) edges.push_back({v, v, 1, edge_function::linear, (coupled && v == 2) ? 0.1 : 0.5});
  if (coupled) edges.push_back({0, 2, 1, edge_function::linear, 0.8});
  return {group_partition::uniform(2, 2), edges, 1.0, coupled ? 0.25 : 0.0, 0.0, 1, 0};
}

}  // namespace fixtures
