#pragma once
#include <cstdint>
#include <span>
#include <vector>

#include "brwre/rng.hpp"

namespace brwre {

double draw_normal(Xoshiro256pp& rng);

// Exact Binomial(n, p). Inversion for small n*p, BTRS rejection otherwise.
uint64_t draw_binomial(Xoshiro256pp& rng, uint64_t n, double p);

// Binomial via rounded normal approximation, clamped to [0, n].
uint64_t draw_binomial_gaussian(Xoshiro256pp& rng, uint64_t n, double p);

// Multinomial(n, probs) by sequential conditional binomials. Each conditional
// binomial whose remaining count is >= gaussian_min uses the normal
// approximation and sets *used_gaussian.
void draw_multinomial(Xoshiro256pp& rng, uint64_t n, std::span<const double> probs,
                      std::span<uint64_t> out, uint64_t gaussian_min,
                      bool* used_gaussian);

}  // namespace brwre
