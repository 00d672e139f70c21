// Command-line front end: subcommands synth, bases, fit, estimate, eval, viz,
// gradcheck and corr-oracle.
//
// Exit codes: 0 success, 1 domain error (bad file, shape mismatch, failed
// check), 2 usage error (unknown flag, bad value, unknown config key).

#ifndef FLOWSEEK_CLI_HPP
#define FLOWSEEK_CLI_HPP

#include <iosfwd>
#include <string>
#include <vector>

namespace flowseek::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitDomain = 1;
inline constexpr int kExitUsage = 2;

/// `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int run(int argc, char** argv);

}  // namespace flowseek::cli

#endif  // FLOWSEEK_CLI_HPP
