#pragma once

#include <array>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace kneexnet {

inline constexpr std::size_t kNumGrades = 5;

/// Kellgren-Lawrence severity grade, 0 (None) through 4 (Severe).
class KLGrade {
public:
    constexpr KLGrade() = default;
    explicit constexpr KLGrade(int value) : value_(value) {
        if (value < 0 || value >= static_cast<int>(kNumGrades)) {
            throw std::out_of_range("KL grade must be in [0,4], got " + std::to_string(value));
        }
    }

    constexpr int value() const { return value_; }
    constexpr std::size_t index() const { return static_cast<std::size_t>(value_); }

    std::string_view label() const {
        static constexpr std::array<std::string_view, kNumGrades> names = {
            "None", "Doubtful", "Minimal", "Moderate", "Severe"};
        return names[index()];
    }

    friend constexpr bool operator==(KLGrade, KLGrade) = default;
    friend constexpr auto operator<=>(KLGrade, KLGrade) = default;

private:
    int value_ = 0;
};

using ClassCounts = std::array<std::size_t, kNumGrades>;

}  // namespace kneexnet
