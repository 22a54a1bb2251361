#pragma once

#include <stdexcept>
#include <string>

namespace biasaudit {

// All harness failures derive from error with a short machine-readable code
// so the CLI can exit with a single parseable line.
class error : public std::runtime_error {
  public:
    error(std::string code, const std::string& message)
        : std::runtime_error(message), code_(std::move(code)) {}
    const std::string& code() const { return code_; }

  private:
    std::string code_;
};

#define BIASAUDIT_ERROR(Name, code_str)                                         \
    class Name : public error {                                                 \
      public:                                                                   \
        explicit Name(const std::string& message) : error(code_str, message) {} \
    }

BIASAUDIT_ERROR(parse_error, "parse_error");
BIASAUDIT_ERROR(validation_error, "validation_error");
BIASAUDIT_ERROR(unknown_stereotype, "unknown_stereotype");
BIASAUDIT_ERROR(index_out_of_range, "index_out_of_range");
BIASAUDIT_ERROR(domain_error, "domain_error");
BIASAUDIT_ERROR(empty_margin, "empty_margin");
BIASAUDIT_ERROR(zero_variance, "zero_variance");
BIASAUDIT_ERROR(convergence_error, "convergence_error");
BIASAUDIT_ERROR(missing_behavior, "missing_behavior");
BIASAUDIT_ERROR(empty_selection, "empty_selection");
BIASAUDIT_ERROR(insufficient_data, "insufficient_data");
BIASAUDIT_ERROR(augmentation_failed, "augmentation_failed");
BIASAUDIT_ERROR(io_error, "io_error");

#undef BIASAUDIT_ERROR

// Backend-call failures carry how many requests were actually made.
class provider_error : public error {
  public:
    provider_error(std::string code, const std::string& message, int attempts)
        : error(std::move(code), message), attempts_(attempts) {}
    int attempts() const { return attempts_; }

  private:
    int attempts_ = 0;
};

#define BIASAUDIT_PROVIDER_ERROR(Name, code_str)                    \
    class Name : public provider_error {                            \
      public:                                                       \
        explicit Name(const std::string& message, int attempts = 1) \
            : provider_error(code_str, message, attempts) {}        \
    }

BIASAUDIT_PROVIDER_ERROR(auth_error, "auth_error");
BIASAUDIT_PROVIDER_ERROR(transport_error, "transport_error");
BIASAUDIT_PROVIDER_ERROR(rate_limit_exhausted, "rate_limit_exhausted");

#undef BIASAUDIT_PROVIDER_ERROR

}  // namespace biasaudit
