#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace detnas {

// Minimal arbitrary-precision unsigned integer, enough for search-space
// cardinalities (4^n for any n). Limbs are base 1e9, little-endian.
class BigUint {
  public:
    BigUint() : limbs_{0} {}
    explicit BigUint(uint64_t v);

    static BigUint pow(uint32_t base, uint32_t exponent);

    void mul_u32(uint32_t m);

    bool fits_u64() const;
    uint64_t to_u64() const;  // throws if the value does not fit
    double to_double() const;
    std::string to_string() const;
    // "1.209e24" style approximation with the given significant digits.
    std::string to_scientific(int significant_digits = 4) const;

    bool operator==(const BigUint& other) const { return limbs_ == other.limbs_; }
    bool operator!=(const BigUint& other) const { return !(*this == other); }

  private:
    static constexpr uint32_t kBase = 1000000000u;
    std::vector<uint32_t> limbs_;
};

}  // namespace detnas
