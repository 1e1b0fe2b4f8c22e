#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "lapis/config.hpp"

namespace lapis::cli {

// Exit codes: 0 success, 1 runtime failure, 2 usage error.
int dispatch(int argc, const char* const* argv, const EnvLookup& env, std::ostream& out,
             std::ostream& err);

int dispatch(const std::vector<std::string>& args, const EnvLookup& env, std::ostream& out,
             std::ostream& err);

}  // namespace lapis::cli
