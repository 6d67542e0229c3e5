#include "meshgrow/condition.hpp"

#include <algorithm>

#include "meshgrow/errors.hpp"

namespace meshgrow {

std::string to_string(Sex sex) {
  return sex == Sex::kMale ? "male" : "female";
}

Sex sex_from_string(const std::string& s) {
  std::string lower(s);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  if (lower == "male" || lower == "m") return Sex::kMale;
  if (lower == "female" || lower == "f") return Sex::kFemale;
  throw ContractError("sex: expected male/female, got '" + s + "'");
}

ClinicalCondition::ClinicalCondition(int age_years, Sex sex, int delta_months)
    : age_years(age_years), sex(sex), delta_months(delta_months) {
  if (age_years < 0 || age_years >= kConditionSlot) {
    throw ContractError("condition: age " + std::to_string(age_years) +
                        " outside [0, 99]");
  }
  if (delta_months < -kMaxAbsDelta || delta_months > kMaxAbsDelta) {
    throw ContractError("condition: time interval " +
                        std::to_string(delta_months) + " outside [-49, 49]");
  }
}

std::array<uint8_t, kConditionSlot> encode_interval(int delta_months) {
  if (delta_months < -kMaxAbsDelta || delta_months > kMaxAbsDelta) {
    throw ContractError("encode_interval: " + std::to_string(delta_months) +
                        " outside [-49, 49]");
  }
  std::array<uint8_t, kConditionSlot> v{};
  const int zeros = 50 + delta_months;  // 1-based positions 1..zeros are 0
  for (int i = zeros; i < kConditionSlot; ++i) v[i] = 1;
  return v;
}

std::array<uint8_t, kConditionSlot> encode_age(int age_years) {
  if (age_years < 0 || age_years >= kConditionSlot) {
    throw ContractError("encode_age: " + std::to_string(age_years) +
                        " outside [0, 99]");
  }
  std::array<uint8_t, kConditionSlot> v{};
  for (int i = 0; i < age_years; ++i) v[i] = 1;
  return v;
}

std::array<uint8_t, kConditionSlot> encode_sex(Sex sex) {
  std::array<uint8_t, kConditionSlot> v{};
  if (sex == Sex::kFemale) v.fill(1);
  return v;
}

ConditionVector encode_condition(const ClinicalCondition& c) {
  return ConditionVector{encode_age(c.age_years), encode_sex(c.sex),
                         encode_interval(c.delta_months)};
}

std::vector<double> ConditionVector::concatenated() const {
  std::vector<double> out;
  out.reserve(kConditionWidth);
  for (uint8_t b : age_vec) out.push_back(b);
  for (uint8_t b : sex_vec) out.push_back(b);
  for (uint8_t b : interval_vec) out.push_back(b);
  return out;
}

}  // namespace meshgrow
