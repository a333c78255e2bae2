#include "detnas/bigint.hpp"

#include <cstdio>

#include "detnas/errors.hpp"

namespace detnas {

BigUint::BigUint(uint64_t v) {
    do {
        limbs_.push_back(static_cast<uint32_t>(v % kBase));
        v /= kBase;
    } while (v > 0);
}

BigUint BigUint::pow(uint32_t base, uint32_t exponent) {
    BigUint r(1);
    for (uint32_t i = 0; i < exponent; ++i) r.mul_u32(base);
    return r;
}

void BigUint::mul_u32(uint32_t m) {
    uint64_t carry = 0;
    for (auto& limb : limbs_) {
        uint64_t cur = static_cast<uint64_t>(limb) * m + carry;
        limb = static_cast<uint32_t>(cur % kBase);
        carry = cur / kBase;
    }
    while (carry > 0) {
        limbs_.push_back(static_cast<uint32_t>(carry % kBase));
        carry /= kBase;
    }
}

bool BigUint::fits_u64() const {
    if (limbs_.size() > 3) return false;
    // 2^64-1 = 18 446744073 709551615 -> top limb at most 18.
    if (limbs_.size() == 3 && limbs_[2] > 18) return false;
    if (limbs_.size() == 3 && limbs_[2] == 18) {
        if (limbs_[1] > 446744073u) return false;
        if (limbs_[1] == 446744073u && limbs_[0] > 709551615u) return false;
    }
    return true;
}

uint64_t BigUint::to_u64() const {
    if (!fits_u64()) throw Error("BigUint value does not fit in 64 bits: " + to_string());
    uint64_t v = 0;
    for (auto it = limbs_.rbegin(); it != limbs_.rend(); ++it) v = v * kBase + *it;
    return v;
}

double BigUint::to_double() const {
    double v = 0.0;
    for (auto it = limbs_.rbegin(); it != limbs_.rend(); ++it) v = v * kBase + *it;
    return v;
}

std::string BigUint::to_string() const {
    std::string s = std::to_string(limbs_.back());
    char buf[16];
    for (auto it = limbs_.rbegin() + 1; it != limbs_.rend(); ++it) {
        std::snprintf(buf, sizeof(buf), "%09u", *it);
        s += buf;
    }
    return s;
}

std::string BigUint::to_scientific(int significant_digits) const {
    const std::string digits = to_string();
    const int exponent = static_cast<int>(digits.size()) - 1;
    // Round to the requested number of significant digits.
    std::string mant = digits.substr(0, static_cast<size_t>(significant_digits) + 1);
    while (static_cast<int>(mant.size()) < significant_digits + 1) mant += '0';
    long long m = std::stoll(mant);
    long long rounded = (m + 5) / 10;
    std::string r = std::to_string(rounded);
    int exp = exponent;
    if (static_cast<int>(r.size()) > significant_digits) {  // rounding carried over
        r = r.substr(0, static_cast<size_t>(significant_digits));
        ++exp;
    }
    std::string out;
    out += r[0];
    if (r.size() > 1) {
        out += '.';
        out += r.substr(1);
    }
    out += 'e';
    out += std::to_string(exp);
    return out;
}

}  // namespace detnas
