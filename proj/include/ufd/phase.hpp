#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "ufd/errors.hpp"

namespace ufd {

enum class Phase : std::uint8_t { a = 0, b = 1, c = 2 };

inline char phase_char(Phase p) { return static_cast<char>('a' + static_cast<int>(p)); }

/// Set of phases present on a bus or branch, kept as a 3-bit mask.
/// Local indices follow phase order a < b < c, so a {a,c} element has
/// local index 0 for phase a and 1 for phase c.
class PhaseSet {
  public:
    PhaseSet() = default;
    explicit PhaseSet(std::uint8_t mask) : mask_(mask & 0x7u) {}

    static PhaseSet parse(const std::string& s) {
        std::uint8_t m = 0;
        for (char ch : s) {
            if (ch < 'a' || ch > 'c') throw ParseError("invalid phase character '" + std::string(1, ch) + "'");
            m |= static_cast<std::uint8_t>(1u << (ch - 'a'));
        }
        if (m == 0) throw ParseError("empty phase set");
        return PhaseSet(m);
    }

    bool contains(Phase p) const { return (mask_ >> static_cast<int>(p)) & 1u; }
    bool contains(const PhaseSet& other) const { return (mask_ & other.mask_) == other.mask_; }
    int size() const { return ((mask_ >> 0) & 1) + ((mask_ >> 1) & 1) + ((mask_ >> 2) & 1); }
    std::uint8_t mask() const { return mask_; }
    bool empty() const { return mask_ == 0; }

    /// Local index of phase p within this set (phases ordered a,b,c).
    int index_of(Phase p) const {
        if (!contains(p)) throw ValidationError("phase " + std::string(1, phase_char(p)) + " not in set " + str());
        int idx = 0;
        for (int q = 0; q < static_cast<int>(p); ++q)
            if ((mask_ >> q) & 1u) ++idx;
        return idx;
    }

    std::vector<Phase> list() const {
        std::vector<Phase> out;
        for (int q = 0; q < 3; ++q)
            if ((mask_ >> q) & 1u) out.push_back(static_cast<Phase>(q));
        return out;
    }

    std::string str() const {
        std::string s;
        for (Phase p : list()) s.push_back(phase_char(p));
        return s;
    }

    friend bool operator==(const PhaseSet& x, const PhaseSet& y) { return x.mask_ == y.mask_; }

  private:
    std::uint8_t mask_ = 0;
};

inline Phase parse_phase(const std::string& s) {
    if (s.size() != 1 || s[0] < 'a' || s[0] > 'c') throw ParseError("invalid phase '" + s + "'");
    return static_cast<Phase>(s[0] - 'a');
}

}  // namespace ufd
