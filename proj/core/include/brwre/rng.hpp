#pragma once
#include <cstdint>
#include <initializer_list>

namespace brwre {

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Counter-based PRF: absorbs a key word sequence into a 64-bit state.
// The i.i.d. time-space fields (environment atoms, genealogy-mode particle
// draws) are pure functions of these keys, so any draw can be replayed
// without storing the field.
inline uint64_t prf_hash(uint64_t seed, std::initializer_list<uint64_t> words) {
    uint64_t h = splitmix64(seed ^ 0x6a09e667f3bcc908ULL);
    for (uint64_t w : words) h = splitmix64(h ^ (w + 0x9e3779b97f4a7c15ULL));
    return h;
}

inline double u01_from_bits(uint64_t bits) {
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

// xoshiro256++ (Blackman & Vigna). Sequential stream for particle decisions.
class Xoshiro256pp {
  public:
    using result_type = uint64_t;

    explicit Xoshiro256pp(uint64_t seed = 1) { reseed(seed); }

    void reseed(uint64_t seed) {
        uint64_t s = seed;
        for (auto& w : s_) {
            s = splitmix64(s);
            w = s;
        }
        if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 0x9e3779b97f4a7c15ULL;
    }

    uint64_t operator()() {
        const uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    double u01() { return u01_from_bits((*this)()); }

    // Unbiased bounded draw (Lemire).
    uint64_t below(uint64_t n) {
        uint64_t x = (*this)();
        unsigned __int128 m = static_cast<unsigned __int128>(x) * n;
        uint64_t lo = static_cast<uint64_t>(m);
        if (lo < n) {
            uint64_t t = (-n) % n;
            while (lo < t) {
                x = (*this)();
                m = static_cast<unsigned __int128>(x) * n;
                lo = static_cast<uint64_t>(m);
            }
        }
        return static_cast<uint64_t>(m >> 64);
    }

    static constexpr uint64_t min() { return 0; }
    static constexpr uint64_t max() { return ~0ULL; }

  private:
    uint64_t s_[4];

    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
};

}  // namespace brwre
