#pragma once

#include <stdexcept>

namespace deridge {

// Bad caller input: unusable flags, out-of-domain parameters, malformed
// requests.  The CLI maps this to exit code 2.
struct usage_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Unreadable or malformed data files.  CLI exit code 2.
struct io_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// The data admit no answer: rank-zero designs, non-estimable requests,
// numeric breakdown.  CLI exit code 1.
struct model_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace deridge
