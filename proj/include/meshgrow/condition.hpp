#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace meshgrow {

enum class Sex : uint8_t { kMale = 0, kFemale = 1 };

std::string to_string(Sex sex);
Sex sex_from_string(const std::string& s);

inline constexpr int kConditionSlot = 100;   // entries per clinical attribute
inline constexpr int kConditionWidth = 300;  // age | sex | interval
inline constexpr int kMaxAbsDelta = 49;      // forced by the 100-slot layout

// Clinical inputs at the source scan plus the signed target interval.
// Positive delta asks for a future prediction, negative for a past
// reconstruction.
struct ClinicalCondition {
  int age_years;
  Sex sex;
  int delta_months;

  // Throws ContractError unless age is in [0, 99] and delta in [-49, 49].
  ClinicalCondition(int age_years, Sex sex, int delta_months);
};

// Ordinal binary encoding of one condition: three 100-entry 0/1 vectors.
struct ConditionVector {
  std::array<uint8_t, kConditionSlot> age_vec;
  std::array<uint8_t, kConditionSlot> sex_vec;
  std::array<uint8_t, kConditionSlot> interval_vec;

  // [age | sex | interval] as 0/1 doubles, ready for a network input row.
  std::vector<double> concatenated() const;
};

// Interval slots follow the ordinal rule with 1-based positions: entries
// 1..(50+delta) are 0 and (51+delta)..100 are 1, so index 50 divides past
// from future and Hamming distance equals |delta_1 - delta_2|.
std::array<uint8_t, kConditionSlot> encode_interval(int delta_months);

// Thermometer code: the first `age` entries are 1, the rest 0.
std::array<uint8_t, kConditionSlot> encode_age(int age_years);

// Male is all zeros, female all ones.
std::array<uint8_t, kConditionSlot> encode_sex(Sex sex);

ConditionVector encode_condition(const ClinicalCondition& c);

}  // namespace meshgrow
