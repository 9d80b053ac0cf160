#pragma once

#include <functional>

namespace degpop::quad {

/// 15-point Gauss-Legendre on [lo, hi] (signed: hi < lo flips the sign).
double gauss(const std::function<double(double)>& f, double lo, double hi);

/// Integral from `singular` to `to` of f, for f with an integrable
/// singularity at `singular`. The interval is split into at most `levels`
/// panels halving toward the singular endpoint. The remainder next to the
/// singular point is the geometric tail implied by the last two panels,
/// which is exact when f behaves like a power of the distance there. The
/// tail ratio is amplified by 1/(1 - ratio)^2, so the last panels must stay
/// wide enough that rounding of the nodes against `singular` is negligible;
/// ten levels (width |to - singular| / 1024) is the measured optimum.
double graded(const std::function<double(double)>& f, double singular, double to, int levels = 10);

}  // namespace degpop::quad
