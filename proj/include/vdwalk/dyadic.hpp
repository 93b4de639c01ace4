#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace vdwalk {

/// Exact dyadic rational num / 2^shift, kept in lowest terms.
///
/// Disc radii and window sizes are restricted to dyadics so that every
/// lattice membership test reduces to an integer comparison.
class Dyadic {
public:
    constexpr Dyadic() = default;
    Dyadic(std::int64_t num, int shift);

    /// Accepts "3/64", "0.125", "1" or "p/2^q". Non-dyadic values are rejected.
    static Dyadic parse(std::string_view text);

    std::int64_t numerator() const { return num_; }
    int shift() const { return shift_; }
    double to_double() const;

    /// floor(value * 2^k), exact.
    std::int64_t floor_scaled(int k) const;

    /// Canonical text form "num/2^shift" (or an integer when shift == 0).
    std::string str() const;

    friend bool operator==(const Dyadic&, const Dyadic&) = default;
    friend int compare(const Dyadic& a, const Dyadic& b);
    friend bool operator<(const Dyadic& a, const Dyadic& b) { return compare(a, b) < 0; }
    friend bool operator<=(const Dyadic& a, const Dyadic& b) { return compare(a, b) <= 0; }
    friend Dyadic operator*(const Dyadic& a, std::int64_t m) { return Dyadic(a.num_ * m, a.shift_); }

private:
    std::int64_t num_ = 0;
    int shift_ = 0;
};

}  // namespace vdwalk
