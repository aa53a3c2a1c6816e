#pragma once

#include <cmath>
#include <map>
#include <random>
#include <vector>

#include "hull/error.hpp"
#include "hull/rational.hpp"

namespace hull {

/**
 * Exact element of Q(sqrt 2, sqrt 3, ...): a finite sum of c * sqrt(s) with
 * s a squarefree positive integer. Enough to square roots of rationals and
 * multiply them back.
 */
class Surd {
public:
    Surd() = default;
    Surd(long v) : Surd(Rational(v)) {}
    Surd(const Rational& v) {
        if (v != 0) terms_.emplace(mpz_class(1), v);
    }

    /// sqrt(q) for q >= 0.
    static Surd sqrt_of(const Rational& q) {
        if (q < 0) throw Error(ErrorKind::precondition, "calgebra", "square root of a negative rational");
        Surd out;
        if (q == 0) return out;
        mpz_class n = q.get_num() * q.get_den();
        auto [square, free] = split_square(n);
        out.terms_.emplace(free, Rational(square) / Rational(q.get_den()));
        return out;
    }

    bool is_zero() const { return terms_.empty(); }
    bool is_rational() const { return terms_.empty() || (terms_.size() == 1 && terms_.begin()->first == 1); }
    Rational rational() const { return terms_.empty() ? Rational(0) : terms_.begin()->second; }

    double to_double() const {
        double v = 0;
        for (const auto& [s, c] : terms_) v += c.get_d() * std::sqrt(s.get_d());
        return v;
    }

    Surd& operator+=(const Surd& o) {
        for (const auto& [s, c] : o.terms_) {
            auto& slot = terms_[s];
            slot += c;
            if (slot == 0) terms_.erase(s);
        }
        return *this;
    }
    Surd operator-() const {
        Surd out = *this;
        for (auto& [s, c] : out.terms_) c = -c;
        return out;
    }
    friend Surd operator+(Surd a, const Surd& b) { return a += b; }
    friend Surd operator-(Surd a, const Surd& b) { return a += -b; }
    friend Surd operator*(const Surd& a, const Surd& b) {
        Surd out;
        for (const auto& [s1, c1] : a.terms_)
            for (const auto& [s2, c2] : b.terms_) {
                mpz_class g;
                mpz_gcd(g.get_mpz_t(), s1.get_mpz_t(), s2.get_mpz_t());
                Surd t;
                t.terms_.emplace((s1 / g) * (s2 / g), c1 * c2 * Rational(g));
                out += t;
            }
        return out;
    }
    friend bool operator==(const Surd& a, const Surd& b) { return a.terms_ == b.terms_; }

    std::string str() const {
        if (terms_.empty()) return "0";
        std::string out;
        for (const auto& [s, c] : terms_) {
            if (!out.empty()) out += " + ";
            out += to_string(c);
            if (s != 1) out += "*sqrt(" + s.get_str() + ")";
        }
        return out;
    }

private:
    /// n = square^2 * free with free squarefree (trial division, then a perfect-square test on the cofactor).
    static std::pair<mpz_class, mpz_class> split_square(mpz_class n) {
        mpz_class square = 1, free = 1;
        for (unsigned long p = 2; p < 65536 && p * p <= n; ++p) {
            unsigned e = 0;
            while (mpz_divisible_ui_p(n.get_mpz_t(), p)) {
                n /= p;
                ++e;
            }
            for (unsigned i = 0; i < e / 2; ++i) square *= p;
            if (e % 2) free *= p;
        }
        if (mpz_perfect_square_p(n.get_mpz_t())) {
            mpz_class r;
            mpz_sqrt(r.get_mpz_t(), n.get_mpz_t());
            square *= r;
        } else {
            free *= n;
        }
        return {square, free};
    }

    std::map<mpz_class, Rational> terms_;
};

inline double to_double(const Surd& s) { return s.to_double(); }
inline bool is_zero(const Rational& q) { return q == 0; }
inline bool is_zero(const Surd& s) { return s.is_zero(); }

/// Finitely supported operator on l^2 of a finite basis; entries kept sorted by (row, col).
template <class Scalar>
class SparseOperator {
public:
    using Key = std::pair<std::uint32_t, std::uint32_t>;

    SparseOperator() = default;
    explicit SparseOperator(std::size_t dim) : dim_(dim) {}

    static SparseOperator identity(std::size_t dim) {
        SparseOperator out(dim);
        for (std::uint32_t i = 0; i < dim; ++i) out.entries_.emplace(Key{i, i}, Scalar(1));
        return out;
    }

    std::size_t dim() const noexcept { return dim_; }
    std::size_t nnz() const noexcept { return entries_.size(); }
    const std::map<Key, Scalar>& entries() const noexcept { return entries_; }

    Scalar at(std::uint32_t r, std::uint32_t c) const {
        auto it = entries_.find({r, c});
        return it == entries_.end() ? Scalar(0) : it->second;
    }

    void add(std::uint32_t r, std::uint32_t c, const Scalar& v) {
        if (is_zero(v)) return;
        auto [it, fresh] = entries_.emplace(Key{r, c}, v);
        if (fresh) return;
        it->second = it->second + v;
        if (is_zero(it->second)) entries_.erase(it);
    }

    SparseOperator adjoint() const {
        SparseOperator out(dim_);
        for (const auto& [k, v] : entries_) out.entries_.emplace(Key{k.second, k.first}, v);
        return out;
    }

    SparseOperator diagonal_part() const {
        SparseOperator out(dim_);
        for (const auto& [k, v] : entries_)
            if (k.first == k.second) out.entries_.emplace(k, v);
        return out;
    }

    bool is_diagonal() const {
        return std::all_of(entries_.begin(), entries_.end(), [](const auto& e) { return e.first.first == e.first.second; });
    }

    SparseOperator scaled(const Scalar& s) const {
        SparseOperator out(dim_);
        for (const auto& [k, v] : entries_) out.add(k.first, k.second, v * s);
        return out;
    }

    friend SparseOperator operator+(const SparseOperator& a, const SparseOperator& b) {
        SparseOperator out = a;
        out.dim_ = std::max(a.dim_, b.dim_);
        for (const auto& [k, v] : b.entries_) out.add(k.first, k.second, v);
        return out;
    }
    friend SparseOperator operator-(const SparseOperator& a, const SparseOperator& b) {
        SparseOperator out = a;
        out.dim_ = std::max(a.dim_, b.dim_);
        for (const auto& [k, v] : b.entries_) out.add(k.first, k.second, Scalar(0) - v);
        return out;
    }
    friend SparseOperator operator*(const SparseOperator& a, const SparseOperator& b) {
        SparseOperator out(std::max(a.dim_, b.dim_));
        for (const auto& [ka, va] : a.entries_) {
            auto it = b.entries_.lower_bound(Key{ka.second, 0});
            for (; it != b.entries_.end() && it->first.first == ka.second; ++it) out.add(ka.first, it->first.second, va * it->second);
        }
        return out;
    }
    friend bool operator==(const SparseOperator& a, const SparseOperator& b) { return a.entries_ == b.entries_; }

    /// Squared l2 norm of column c, exactly.
    Scalar column_norm2(std::uint32_t c) const {
        Scalar s(0);
        for (const auto& [k, v] : entries_)
            if (k.second == c) s = s + v * v;
        return s;
    }

    /// Entries as (row, col, value) triplets in row-major order.
    std::vector<std::tuple<std::uint32_t, std::uint32_t, Scalar>> triplets() const {
        std::vector<std::tuple<std::uint32_t, std::uint32_t, Scalar>> out;
        for (const auto& [k, v] : entries_) out.emplace_back(k.first, k.second, v);
        return out;
    }

private:
    std::size_t dim_ = 0;
    std::map<Key, Scalar> entries_;
};

using RationalOperator = SparseOperator<Rational>;
using SurdOperator = SparseOperator<Surd>;

inline SurdOperator to_surd(const RationalOperator& a) {
    SurdOperator out(a.dim());
    for (const auto& [k, v] : a.entries()) out.add(k.first, k.second, Surd(v));
    return out;
}

/// Diagonal operator with the given values.
inline RationalOperator diagonal_operator(const std::vector<Rational>& values) {
    RationalOperator out(values.size());
    for (std::uint32_t i = 0; i < values.size(); ++i) out.add(i, i, values[i]);
    return out;
}

/// Partial isometry with A*A and AA* diagonal 0/1: norm exactly 0 or 1.
template <class Scalar>
bool is_partial_isometry(const SparseOperator<Scalar>& a) {
    auto idem = [](const SparseOperator<Scalar>& p) {
        if (!p.is_diagonal()) return false;
        return std::all_of(p.entries().begin(), p.entries().end(), [](const auto& e) { return e.second == Scalar(1); });
    };
    return idem(a.adjoint() * a) && idem(a * a.adjoint());
}

struct NormEstimate {
    double value = 0;
    double lower = 0;  ///< certified: sqrt of a Rayleigh quotient of A*A
    double upper = 0;  ///< certified: sqrt of the max absolute row sum of A*A
    bool exact = false;
};

/**
 * Operator norm: exact for partial isometries, else power iteration on A*A
 * to relative tolerance `tol`, bracketed by a Rayleigh quotient below and the
 * row-sum bound above.
 */
template <class Scalar>
NormEstimate operator_norm(const SparseOperator<Scalar>& a, double tol = 1e-10, int max_iter = 5000) {
    NormEstimate est;
    if (a.nnz() == 0) {
        est.exact = true;
        return est;
    }
    if (is_partial_isometry(a)) {
        est.value = est.lower = est.upper = 1;
        est.exact = true;
        return est;
    }
    std::vector<std::tuple<std::uint32_t, std::uint32_t, double>> m;
    for (const auto& [k, v] : a.entries()) m.emplace_back(k.first, k.second, to_double(v));
    std::size_t n = a.dim();
    auto apply = [&](const std::vector<double>& x) {
        std::vector<double> y(n, 0.0), z(n, 0.0);
        for (const auto& [r, c, v] : m) y[r] += v * x[c];
        for (const auto& [r, c, v] : m) z[c] += v * y[r];
        return z;
    };
    // row-sum bound on |A|^T |A|
    std::vector<double> ones(n, 1.0), y(n, 0.0), z(n, 0.0);
    for (const auto& [r, c, v] : m) y[r] += std::abs(v);
    for (const auto& [r, c, v] : m) z[c] += std::abs(v) * y[r];
    est.upper = std::sqrt(*std::max_element(z.begin(), z.end()));

    std::mt19937_64 rng(0x5eed);
    std::uniform_real_distribution<double> dist(0.5, 1.5);
    std::vector<double> x(n);
    for (auto& v : x) v = dist(rng);
    double lambda = 0;
    for (int it = 0; it < max_iter; ++it) {
        double nx = 0;
        for (double v : x) nx += v * v;
        nx = std::sqrt(nx);
        if (nx == 0) break;
        for (auto& v : x) v /= nx;
        auto ax = apply(x);
        double rq = 0;
        for (std::size_t i = 0; i < n; ++i) rq += x[i] * ax[i];
        bool done = it > 0 && std::abs(rq - lambda) <= tol * std::max(1.0, std::abs(rq));
        lambda = std::max(lambda, rq);
        x = std::move(ax);
        if (done) break;
    }
    est.lower = std::sqrt(std::max(0.0, lambda));
    est.value = est.lower;
    return est;
}

} // namespace hull
