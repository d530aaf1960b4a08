#ifndef METAIS_COMMON_HPP
#define METAIS_COMMON_HPP

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

/**
 * @file common.hpp
 * @brief Shared value types, error classes and small utilities.
 */

namespace metais {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input file; the message carries the line number.
class ParseError : public Error {
public:
    ParseError(const std::string& source, std::size_t line, const std::string& what)
        : Error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

/// A precondition on an argument does not hold.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/**
 * Dense row-major matrix of doubles.
 */
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool empty() const { return rows_ == 0; }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    const std::vector<double>& values() const { return data_; }

    /// Rows picked by `indices`, in that order.
    Matrix select_rows(std::span<const std::size_t> indices) const;

    /// Appends the rows of `other`; column counts must agree.
    void append_rows(const Matrix& other);

    bool operator==(const Matrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Runs `fn(i)` for i in [0, n) on up to `jobs` threads. Results must not
/// depend on the schedule; callers write into disjoint slots.
void parallel_for(std::size_t n, unsigned jobs, const std::function<void(std::size_t)>& fn);

/// SplitMix64 finalizer; used to derive independent sub-seeds.
std::uint64_t mix_seed(std::uint64_t x);

/**
 * Portable random source (SplitMix64 stream). No `<random>` distributions are
 * involved, so a seed produces the same draws with every standard library.
 */
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next();

    /// Uniform integer in [0, n), n > 0, without modulo bias.
    std::size_t index(std::size_t n);

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform();

    /// Standard normal deviate (Box-Muller, no caching).
    double normal();

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[index(i)]);
        }
    }

private:
    std::uint64_t state_;
};

/// Shortest decimal text that parses back to exactly `v`.
std::string format_double(double v);

} // namespace metais

#endif
