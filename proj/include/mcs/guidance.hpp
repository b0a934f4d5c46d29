#pragma once

#include <vector>

#include "mcs/diffusion.hpp"
#include "mcs/tensor.hpp"

namespace mcs {

struct ConstraintSet {
  double tau = 0.25;           // squared-distance threshold, m^2
  double lambda_smooth = 0.05; // weight of the smoothness cost
  double dist_weight = 1.0;    // weight of the separation reward
};

void validate(const ConstraintSet& constraints);  // throws std::invalid_argument

// Hip-separation reward between the candidate and already-generated groups.
// Per frame and candidate character, min(d^2 to the nearest hip of each other
// group - tau, 0), averaged over frames, the two candidate characters and the
// other groups. Always <= 0; zero iff everything is at least sqrt(tau) away.
// The gradient covers candidate hip position channels only.
GuidanceEval group_distance(const std::vector<double>& candidate, const PairShape& shape,
                            const std::vector<const std::vector<double>*>& others, double tau);

// Squared acceleration over the concatenation of the last (up to) 3 observed
// frames and all candidate frames, all joints and both characters. `observed`
// may have any frame count >= 1 (observed_shape.clip_len); its trailing frames
// are the seam context. Gradient covers candidate position channels.
GuidanceEval smoothness_cost(const std::vector<double>& candidate, const PairShape& shape,
                             const std::vector<double>& observed, const PairShape& observed_shape,
                             int fps);

// Ascent objective: dist_weight * group_distance - lambda_smooth * smoothness.
// A single +gradient step improves separation and smoothness together.
// `observed` may be empty (no smoothness term). Rotation and velocity channels
// receive zero gradient.
GuidanceEval total_guidance(const std::vector<double>& candidate, const PairShape& shape,
                            const std::vector<const std::vector<double>*>& others,
                            const std::vector<double>& observed, const PairShape& observed_shape,
                            const ConstraintSet& constraints, int fps);

}  // namespace mcs
