#ifndef VIBREC_CLI_HPP_
#define VIBREC_CLI_HPP_

#include <ostream>
#include <string>
#include <vector>

namespace vibrec {

// Exit codes: 0 success, 2 usage/input error, 3 runtime/training error,
// 4 verification (gradcheck) failure.
int run_cli(std::vector<std::string> args, std::ostream& out, std::ostream& err);

}  // namespace vibrec

#endif  // VIBREC_CLI_HPP_
