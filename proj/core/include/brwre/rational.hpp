#pragma once
#include <cstdint>
#include <string>

#include "brwre/errors.hpp"

namespace brwre {

// Exact rational on int64 numerator/denominator, always normalized
// (den > 0, gcd(|num|, den) = 1). Intermediates run through __int128 and
// anything that cannot be reduced back into int64 throws OverflowError.
// Big enough for environment moments and W_n coefficients up to |n| = 8.
class Rational {
  public:
    constexpr Rational() = default;
    Rational(long long n) : num_(n), den_(1) {}
    Rational(long long n, long long d) { assign(n, d); }

    long long num() const { return static_cast<long long>(num_); }
    long long den() const { return static_cast<long long>(den_); }

    double to_double() const {
        return static_cast<double>(num_) / static_cast<double>(den_);
    }

    bool is_zero() const { return num_ == 0; }

    Rational operator-() const {
        Rational r;
        r.num_ = -num_;
        r.den_ = den_;
        return r;
    }

    friend Rational operator+(const Rational& a, const Rational& b) {
        return from128(a.num_ * b.den_ + b.num_ * a.den_, a.den_ * b.den_);
    }
    friend Rational operator-(const Rational& a, const Rational& b) {
        return from128(a.num_ * b.den_ - b.num_ * a.den_, a.den_ * b.den_);
    }
    friend Rational operator*(const Rational& a, const Rational& b) {
        return from128(a.num_ * b.num_, a.den_ * b.den_);
    }
    friend Rational operator/(const Rational& a, const Rational& b) {
        if (b.num_ == 0) throw NumericError("rational division by zero");
        return from128(a.num_ * b.den_, a.den_ * b.num_);
    }

    Rational& operator+=(const Rational& o) { return *this = *this + o; }
    Rational& operator-=(const Rational& o) { return *this = *this - o; }
    Rational& operator*=(const Rational& o) { return *this = *this * o; }
    Rational& operator/=(const Rational& o) { return *this = *this / o; }

    friend bool operator==(const Rational& a, const Rational& b) {
        return a.num_ == b.num_ && a.den_ == b.den_;
    }
    friend bool operator!=(const Rational& a, const Rational& b) { return !(a == b); }
    friend bool operator<(const Rational& a, const Rational& b) {
        return a.num_ * b.den_ < b.num_ * a.den_;
    }
    friend bool operator<=(const Rational& a, const Rational& b) {
        return a.num_ * b.den_ <= b.num_ * a.den_;
    }
    friend bool operator>(const Rational& a, const Rational& b) { return b < a; }
    friend bool operator>=(const Rational& a, const Rational& b) { return b <= a; }

    Rational pow(int e) const {
        if (e < 0) return Rational(1) / pow(-e);
        Rational acc(1), base = *this;
        while (e > 0) {
            if (e & 1) acc *= base;
            base = (e > 1) ? base * base : base;
            e >>= 1;
        }
        return acc;
    }

    std::string str() const {
        std::string s = std::to_string(num());
        if (den_ != 1) s += "/" + std::to_string(den());
        return s;
    }

    // Nearest rational with denominator <= max_den (continued fractions).
    // Used to recover exact fractions like 3/5 from decimal config input.
    static Rational from_double(double x, long long max_den = 1000000000LL) {
        if (x != x) throw NumericError("cannot rationalize NaN");
        bool neg = x < 0;
        double v = neg ? -x : x;
        long long p0 = 0, q0 = 1, p1 = 1, q1 = 0;
        double frac = v;
        for (int it = 0; it < 64; ++it) {
            double fl = (frac > 9.2e18) ? 9.2e18 : frac;
            long long a = static_cast<long long>(fl);
            __int128 p2 = static_cast<__int128>(a) * p1 + p0;
            __int128 q2 = static_cast<__int128>(a) * q1 + q0;
            if (q2 > max_den || p2 > INT64_MAX) break;
            p0 = p1;
            q0 = q1;
            p1 = static_cast<long long>(p2);
            q1 = static_cast<long long>(q2);
            double rem = frac - static_cast<double>(a);
            if (rem < 1e-15) break;
            frac = 1.0 / rem;
        }
        if (q1 == 0) throw OverflowError("cannot rationalize value");
        return Rational(neg ? -p1 : p1, q1);
    }

  private:
    __int128 num_ = 0;
    __int128 den_ = 1;

    static unsigned __int128 gcd128(unsigned __int128 a, unsigned __int128 b) {
        while (b != 0) {
            unsigned __int128 t = a % b;
            a = b;
            b = t;
        }
        return a;
    }

    static Rational from128(__int128 n, __int128 d) {
        if (d == 0) throw NumericError("rational with zero denominator");
        if (d < 0) {
            n = -n;
            d = -d;
        }
        unsigned __int128 un = n < 0 ? static_cast<unsigned __int128>(-n)
                                     : static_cast<unsigned __int128>(n);
        unsigned __int128 ud = static_cast<unsigned __int128>(d);
        if (un != 0) {
            unsigned __int128 g = gcd128(un, ud);
            n /= static_cast<__int128>(g);
            d /= static_cast<__int128>(g);
        } else {
            d = 1;
        }
        const __int128 lim = static_cast<__int128>(INT64_MAX);
        if (n > lim || n < -lim || d > lim)
            throw OverflowError("rational overflow");
        Rational r;
        r.num_ = n;
        r.den_ = d;
        return r;
    }

    void assign(long long n, long long d) {
        *this = from128(static_cast<__int128>(n), static_cast<__int128>(d));
    }
};

}  // namespace brwre
