// SPDX-License-Identifier: Apache-2.0

#ifndef GWSEG_CLI_HPP
#define GWSEG_CLI_HPP

#include <ostream>
#include <span>
#include <string>

namespace gwseg {

/// Runs one subcommand (args exclude the program name). Returns 0 on
/// success and 2 on any usage or runtime error, after writing a diagnostic
/// to `err`.
int run_command(std::span<const std::string> args, std::ostream& out, std::ostream& err);

}  // namespace gwseg

#endif  // GWSEG_CLI_HPP
