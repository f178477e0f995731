#pragma once

#include "deblur/blur.hpp"
#include "deblur/image.hpp"

namespace deblur {

// Objective: min_x ½‖Kx − y‖² + λ‖x‖². The ½ sits on the data term only, so
// gradients and closed forms carry 2λ. Every report that prints λ states
// this convention.
struct TikhonovProblem {
  TikhonovProblem(const BlurOperator& blur_op, double lambda_value);

  const BlurOperator& op() const { return *op_; }
  double lambda() const { return lambda_; }

 private:
  const BlurOperator* op_;
  double lambda_;
};

// Closed-form minimizer via the spectral decomposition:
// x̂ = conj(t)·ŷ / (|t|² + 2λ) per frequency.
Image tikhonov_direct(const TikhonovProblem& p, const Image& y);

// M iterations of CGLS on the stacked system [K; √(2λ)·I]·x = [y; 0]
// starting from x0. Recurrence breakdown (zero denominator) means the
// iterate has converged; the current iterate is returned. M = 0 returns x0.
Image cgls_solve(const TikhonovProblem& p, const Image& y, int iterations,
                 const Image& x0);
Image cgls_solve(const TikhonovProblem& p, const Image& y, int iterations);

// M fixed-step gradient-descent iterations
// x ← x − step·(Kᵀ(Kx − y) + 2λx) from x0. Affine in y, which makes the
// linear-part operator norm exactly computable. M = 0 returns x0.
Image landweber_solve(const TikhonovProblem& p, const Image& y, int iterations,
                      double step, const Image& x0);
Image landweber_solve(const TikhonovProblem& p, const Image& y, int iterations,
                      double step);

// Classical fixed step 1/(‖K‖² + 2λ): safely inside the contraction region,
// converges to the Tikhonov solution as M → ∞.
double landweber_fixed_point_step(const TikhonovProblem& p);

// Strict upper bound for contraction of the iteration map: 2/(‖K‖² + 2λ).
double landweber_step_limit(const TikhonovProblem& p);

}  // namespace deblur
