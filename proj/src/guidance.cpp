#include "mcs/guidance.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mcs {

void validate(const ConstraintSet& c) {
  if (!(c.tau > 0.0)) throw std::invalid_argument("tau must be positive");
  if (c.lambda_smooth < 0.0 || c.dist_weight < 0.0)
    throw std::invalid_argument("constraint weights must be >= 0");
}

GuidanceEval group_distance(const std::vector<double>& candidate, const PairShape& shape,
                            const std::vector<const std::vector<double>*>& others, double tau) {
  GuidanceEval eval;
  eval.grad.assign(shape.dim(), 0.0);
  if (others.empty()) return eval;

  const double scale = 1.0 / (static_cast<double>(others.size()) * shape.clip_len * 2.0);
  for (const auto* other : others) {
    if (static_cast<int>(other->size()) != shape.dim())
      throw std::invalid_argument("other group shape mismatch");
    for (int f = 0; f < shape.clip_len; ++f) {
      for (int c = 0; c < 2; ++c) {
        const Vec3 p = hip_position(candidate, shape, c, f);
        // nearest hip of this group at this frame
        Vec3 q = hip_position(*other, shape, 0, f);
        double best = norm2(p - q);
        const Vec3 q1 = hip_position(*other, shape, 1, f);
        const double d1 = norm2(p - q1);
        if (d1 < best) {
          best = d1;
          q = q1;
        }
        const double term = best - tau;
        if (term < 0.0) {
          eval.value += scale * term;
          const Vec3 g = (2.0 * scale) * (p - q);
          const int at = shape.index(c, f, kHipJoint, kPosOffset);
          eval.grad[at] += g.x;
          eval.grad[at + 1] += g.y;
          eval.grad[at + 2] += g.z;
        }
      }
    }
  }
  return eval;
}

GuidanceEval smoothness_cost(const std::vector<double>& candidate, const PairShape& shape,
                             const std::vector<double>& observed, const PairShape& observed_shape,
                             int fps) {
  if (observed_shape.joints != shape.joints)
    throw std::invalid_argument("observed joint count mismatch");
  const int context = std::min(3, observed_shape.clip_len);
  const int len = context + shape.clip_len;
  const double s2 = static_cast<double>(fps) * fps;

  GuidanceEval eval;
  eval.grad.assign(shape.dim(), 0.0);
  std::vector<Vec3> seq(len), acc(len, Vec3{});
  for (int c = 0; c < 2; ++c) {
    for (int j = 0; j < shape.joints; ++j) {
      for (int k = 0; k < context; ++k) {
        const int f = observed_shape.clip_len - context + k;
        const double* at = observed.data() + observed_shape.index(c, f, j, kPosOffset);
        seq[k] = {at[0], at[1], at[2]};
      }
      for (int f = 0; f < shape.clip_len; ++f) {
        const double* at = candidate.data() + shape.index(c, f, j, kPosOffset);
        seq[context + f] = {at[0], at[1], at[2]};
      }
      for (int k = 1; k + 1 < len; ++k) {
        acc[k] = s2 * ((seq[k + 1] - seq[k]) - (seq[k] - seq[k - 1]));
        eval.value += norm2(acc[k]);
      }
      // d/dp_s of sum_k ||acc_k||^2 = 2 * fps^2 * (acc_{s-1} - 2 acc_s + acc_{s+1})
      for (int f = 0; f < shape.clip_len; ++f) {
        const int s = context + f;
        Vec3 g{};
        if (s - 1 >= 1) g += acc[s - 1];
        if (s >= 1 && s + 1 < len) g -= 2.0 * acc[s];
        if (s + 2 < len) g += acc[s + 1];
        g = (2.0 * s2) * g;
        const int at = shape.index(c, f, j, kPosOffset);
        eval.grad[at] += g.x;
        eval.grad[at + 1] += g.y;
        eval.grad[at + 2] += g.z;
      }
    }
  }
  return eval;
}

GuidanceEval total_guidance(const std::vector<double>& candidate, const PairShape& shape,
                            const std::vector<const std::vector<double>*>& others,
                            const std::vector<double>& observed, const PairShape& observed_shape,
                            const ConstraintSet& constraints, int fps) {
  validate(constraints);
  GuidanceEval dist = group_distance(candidate, shape, others, constraints.tau);
  GuidanceEval eval;
  eval.value = constraints.dist_weight * dist.value;
  eval.grad.assign(shape.dim(), 0.0);
  for (int d = 0; d < shape.dim(); ++d) eval.grad[d] = constraints.dist_weight * dist.grad[d];
  if (!observed.empty() && constraints.lambda_smooth != 0.0) {
    GuidanceEval smooth = smoothness_cost(candidate, shape, observed, observed_shape, fps);
    eval.value -= constraints.lambda_smooth * smooth.value;
    for (int d = 0; d < shape.dim(); ++d)
      eval.grad[d] -= constraints.lambda_smooth * smooth.grad[d];
  }
  return eval;
}

}  // namespace mcs
