#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace whatif {

// Every failure carries a stable machine-readable code (snake_case) that the
// HTTP layer and the CLI surface verbatim.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

namespace errc {
inline constexpr const char* kMissingColumn = "missing_column";
inline constexpr const char* kParseError = "parse_error";
inline constexpr const char* kDuplicateId = "duplicate_id";
inline constexpr const char* kEmptyDataset = "empty_dataset";
inline constexpr const char* kInvalidSchema = "invalid_schema";
inline constexpr const char* kShapeMismatch = "shape_mismatch";
inline constexpr const char* kCycleDetected = "cycle_detected";
inline constexpr const char* kUnknownNode = "unknown_node";
inline constexpr const char* kMissingNode = "missing_node";
inline constexpr const char* kOutcomeHasChildren = "outcome_has_children";
inline constexpr const char* kInvalidGraph = "invalid_graph";
inline constexpr const char* kInsufficientData = "insufficient_data";
inline constexpr const char* kNotATreatment = "not_a_treatment";
inline constexpr const char* kUnfittedModel = "unfitted_model";
inline constexpr const char* kUnknownUnit = "unknown_unit";
inline constexpr const char* kEmptyMemberList = "empty_member_list";
inline constexpr const char* kTooManyFeatures = "too_many_features";
inline constexpr const char* kEmptyBackground = "empty_background";
inline constexpr const char* kInvalidArgument = "invalid_argument";
inline constexpr const char* kBadN = "bad_n";
inline constexpr const char* kBadK = "bad_k";
inline constexpr const char* kNoGeometry = "no_geometry";
inline constexpr const char* kBadRequest = "bad_request";
inline constexpr const char* kNotFound = "not_found";
inline constexpr const char* kConfigError = "config_error";
}  // namespace errc

}  // namespace whatif
