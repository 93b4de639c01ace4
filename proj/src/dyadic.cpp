#include "vdwalk/dyadic.hpp"

#include <cmath>
#include <cstdlib>

#include "vdwalk/errors.hpp"

namespace vdwalk {

namespace {

constexpr int kMaxShift = 40;

std::int64_t parse_int(std::string_view s, std::string_view whole) {
    if (s.empty()) throw ParameterError("malformed dyadic '" + std::string(whole) + "'");
    std::int64_t v = 0;
    bool neg = false;
    std::size_t i = 0;
    if (s[0] == '-' || s[0] == '+') {
        neg = s[0] == '-';
        i = 1;
    }
    if (i == s.size()) throw ParameterError("malformed dyadic '" + std::string(whole) + "'");
    for (; i < s.size(); ++i) {
        if (s[i] < '0' || s[i] > '9') throw ParameterError("malformed dyadic '" + std::string(whole) + "'");
        if (v > (INT64_MAX - 9) / 10) throw ParameterError("dyadic out of range '" + std::string(whole) + "'");
        v = v * 10 + (s[i] - '0');
    }
    return neg ? -v : v;
}

int exact_log2(std::int64_t v) {
    if (v <= 0 || (v & (v - 1)) != 0) return -1;
    int s = 0;
    while (v > 1) {
        v >>= 1;
        ++s;
    }
    return s;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    return s;
}

}  // namespace

Dyadic::Dyadic(std::int64_t num, int shift) : num_(num), shift_(shift) {
    if (shift_ < 0) {
        if (shift_ < -30) throw ParameterError("dyadic exponent out of range");
        num_ <<= -shift_;
        shift_ = 0;
    }
    while (shift_ > 0 && num_ % 2 == 0) {
        num_ /= 2;
        --shift_;
    }
    if (num_ == 0) shift_ = 0;
    if (shift_ > kMaxShift) throw ParameterError("dyadic denominator exceeds 2^40");
}

Dyadic Dyadic::parse(std::string_view text) {
    const std::string_view s = trim(text);
    if (auto slash = s.find('/'); slash != std::string_view::npos) {
        const std::int64_t num = parse_int(trim(s.substr(0, slash)), s);
        std::string_view den = trim(s.substr(slash + 1));
        if (den.starts_with("2^")) {
            const std::int64_t q = parse_int(den.substr(2), s);
            if (q < 0 || q > kMaxShift) throw ParameterError("dyadic exponent out of range in '" + std::string(s) + "'");
            return Dyadic(num, static_cast<int>(q));
        }
        const int q = exact_log2(parse_int(den, s));
        if (q < 0) throw ParameterError("denominator of '" + std::string(s) + "' is not a power of two");
        return Dyadic(num, q);
    }
    if (auto dot = s.find('.'); dot != std::string_view::npos) {
        std::string digits(s.substr(0, dot));
        std::string frac(s.substr(dot + 1));
        while (!frac.empty() && frac.back() == '0') frac.pop_back();
        if (frac.size() > 17) throw ParameterError("too many decimals in '" + std::string(s) + "'");
        if (digits.empty() || digits == "-" || digits == "+") digits += "0";
        const bool neg = digits[0] == '-';
        std::int64_t whole = std::llabs(parse_int(digits, s));
        std::int64_t f = frac.empty() ? 0 : parse_int(frac, s);
        std::int64_t pow10 = 1;
        for (std::size_t i = 0; i < frac.size(); ++i) pow10 *= 10;
        // value = (whole * 10^d + f) / 10^d; dyadic iff 5^d divides the numerator.
        std::int64_t num = whole * pow10 + f;
        std::int64_t five = 1;
        for (std::size_t i = 0; i < frac.size(); ++i) five *= 5;
        if (num % five != 0) throw ParameterError("'" + std::string(s) + "' is not a dyadic rational");
        num /= five;
        return Dyadic(neg ? -num : num, static_cast<int>(frac.size()));
    }
    return Dyadic(parse_int(s, s), 0);
}

double Dyadic::to_double() const { return std::ldexp(static_cast<double>(num_), -shift_); }

std::int64_t Dyadic::floor_scaled(int k) const {
    if (k >= shift_) return num_ << (k - shift_);
    const int d = shift_ - k;
    // Arithmetic shift floors toward -infinity for negatives.
    return num_ >> d;
}

std::string Dyadic::str() const {
    if (shift_ == 0) return std::to_string(num_);
    return std::to_string(num_) + "/" + std::to_string(std::int64_t{1} << shift_);
}

int compare(const Dyadic& a, const Dyadic& b) {
    const int s = a.shift_ > b.shift_ ? a.shift_ : b.shift_;
    const __int128 x = static_cast<__int128>(a.num_) << (s - a.shift_);
    const __int128 y = static_cast<__int128>(b.num_) << (s - b.shift_);
    return x < y ? -1 : (x > y ? 1 : 0);
}

}  // namespace vdwalk
