#pragma once

#include <gmpxx.h>

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "hull/error.hpp"

namespace hull {

using Rational = mpq_class;

/// Parses "p/q", "p" or a finite decimal such as "-1.25".
inline Rational parse_rational(std::string_view text) {
    std::string s(text);
    auto bad = [&] { return Error(ErrorKind::precondition, "tiling-core", "not a rational: '" + s + "'"); };
    if (s.empty()) throw bad();
    if (auto dot = s.find('.'); dot != std::string::npos) {
        if (s.find('/') != std::string::npos) throw bad();
        std::string digits = s.substr(0, dot) + s.substr(dot + 1);
        std::string den = "1" + std::string(s.size() - dot - 1, '0');
        if (digits.empty() || digits == "-" || digits == "+") throw bad();
        if (digits[0] == '+') digits.erase(0, 1);
        try {
            Rational q{mpz_class(digits), mpz_class(den)};
            q.canonicalize();
            return q;
        } catch (const std::invalid_argument&) {
            throw bad();
        }
    }
    if (s[0] == '+') s.erase(0, 1);
    Rational q;
    if (q.set_str(s, 10) != 0 || q.get_den() == 0) throw bad();
    q.canonicalize();
    return q;
}

inline Rational frac(long num, long den) {
    Rational q{mpz_class(num), mpz_class(den)};
    q.canonicalize();
    return q;
}

inline std::string to_string(const Rational& q) { return q.get_str(); }

inline double to_double(const Rational& q) { return q.get_d(); }

inline mpz_class floor(const Rational& q) {
    mpz_class r;
    mpz_fdiv_q(r.get_mpz_t(), q.get_num_mpz_t(), q.get_den_mpz_t());
    return r;
}

inline mpz_class ceil(const Rational& q) {
    mpz_class r;
    mpz_cdiv_q(r.get_mpz_t(), q.get_num_mpz_t(), q.get_den_mpz_t());
    return r;
}

/// Largest k/2^bits with (k/2^bits)^2 <= x, for x >= 0.
inline Rational sqrt_lower(const Rational& x, unsigned bits = 48) {
    mpz_class scale = mpz_class(1) << (2 * bits);
    mpz_class scaled = floor(x * Rational(scale));
    mpz_class root;
    mpz_sqrt(root.get_mpz_t(), scaled.get_mpz_t());
    Rational r(root, mpz_class(1) << bits);
    r.canonicalize();
    return r;
}

/// Smallest k/2^bits with (k/2^bits)^2 >= x, for x >= 0.
inline Rational sqrt_upper(const Rational& x, unsigned bits = 48) {
    Rational lo = sqrt_lower(x, bits);
    if (lo * lo == x) return lo;
    Rational step(mpz_class(1), mpz_class(1) << bits);
    step.canonicalize();
    return lo + step;
}

/// Exact square root when x is the square of a rational.
inline std::optional<Rational> exact_sqrt(const Rational& x) {
    if (x < 0) return std::nullopt;
    if (!mpz_perfect_square_p(x.get_num_mpz_t()) || !mpz_perfect_square_p(x.get_den_mpz_t())) return std::nullopt;
    mpz_class n, d;
    mpz_sqrt(n.get_mpz_t(), x.get_num_mpz_t());
    mpz_sqrt(d.get_mpz_t(), x.get_den_mpz_t());
    Rational r(n, d);
    r.canonicalize();
    return r;
}

inline bool fits_int64(const mpz_class& z) { return z.fits_slong_p(); }

inline std::int64_t to_int64(const mpz_class& z) {
    if (!z.fits_slong_p()) throw Error(ErrorKind::internal, "tiling-core", "integer coordinate overflow");
    return z.get_si();
}

} // namespace hull
