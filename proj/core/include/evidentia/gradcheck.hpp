#pragma once

#include <string>
#include <vector>

#include "evidentia/graph.hpp"

namespace evidentia {

// Finite-difference oracle for the reverse-mode engine. The numeric side
// only ever calls forward(), so it stays independent of the backward
// implementation it is checking.

// Max over components of |analytic - numeric| / max(|analytic|, |numeric|, 1e-8),
// numeric via central differences with step epsilon. epsilon must lie in
// [1e-7, 1e-3]; evaluation is in 64-bit precision. Unknown op kinds are
// rejected. The expected point arrays per op kind are documented next to
// the builders in gradcheck.cpp.
double grad_check(const std::string& op_kind, const std::vector<Array>& point, double epsilon);

// Every differentiable op kind, in report order.
const std::vector<std::string>& grad_check_op_kinds();

// Draws `points` random well-conditioned points per op (seeded) and returns
// the worst relative error seen for each op.
struct GradCheckReport {
  std::string op;
  double max_rel_error = 0.0;
};
std::vector<GradCheckReport> grad_check_catalogue(uint64_t seed, double epsilon, int points);

// Same oracle applied to an arbitrary graph: compares backward() against
// central differences for every parameter and every binding listed in
// diff_inputs.
double grad_check_graph(const Graph& g, int loss_node, const ParameterStore& params,
                        const Bindings& bindings, const std::vector<std::string>& diff_inputs,
                        double epsilon);

// End-to-end encoder check: featurized inputs (with real padding) through
// the encoder into a fixed random linear readout, differentiated w.r.t.
// every parameter and every input row. attn1511 runs the full
// hypothesis-conditioned attention path and alternates focus mechanisms
// across points.
std::vector<GradCheckReport> grad_check_encoders(uint64_t seed, double epsilon, int points);

}  // namespace evidentia
