#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace cosaf {

/// Coarse classification used by the CLI to choose an exit code.
enum class ErrorClass { Config, NonConvergence, Verification, Internal };

class Error : public std::runtime_error {
 public:
  Error(ErrorClass cls, const std::string& what) : std::runtime_error(what), cls_(cls) {}
  ErrorClass error_class() const { return cls_; }

 private:
  ErrorClass cls_;
};

struct NonConvergence : Error {
  explicit NonConvergence(const std::string& w) : Error(ErrorClass::NonConvergence, w) {}
};
struct StaggeredNonConvergence : Error {
  explicit StaggeredNonConvergence(const std::string& w) : Error(ErrorClass::NonConvergence, w) {}
};
struct SingularSystem : Error {
  explicit SingularSystem(const std::string& w) : Error(ErrorClass::NonConvergence, w) {}
};
struct NonPositiveParams : Error {
  explicit NonPositiveParams(const std::string& w) : Error(ErrorClass::Config, w) {}
};
struct InitialAdmissibilityViolated : Error {
  explicit InitialAdmissibilityViolated(const std::string& w) : Error(ErrorClass::Config, w) {}
};
struct InadmissibleScenario : Error {
  explicit InadmissibleScenario(const std::string& w) : Error(ErrorClass::Config, w) {}
};
struct MissingRates : Error {
  explicit MissingRates(const std::string& w) : Error(ErrorClass::Internal, w) {}
};
struct ParseError : Error {
  explicit ParseError(const std::string& w) : Error(ErrorClass::Config, w) {}
};

struct ValidationError : Error {
  explicit ValidationError(std::vector<std::string> v)
      : Error(ErrorClass::Config, join(v)), violations(std::move(v)) {}

  std::vector<std::string> violations;

 private:
  static std::string join(const std::vector<std::string>& v) {
    std::string s = "invalid configuration:";
    for (const auto& x : v) s += "\n  - " + x;
    return s;
  }
};

}  // namespace cosaf
