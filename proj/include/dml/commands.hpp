#pragma once

#include <filesystem>
#include <iosfwd>
#include <string_view>

#include "dml/config.hpp"

namespace dml {

enum class Command { train, eval, sweep, bench, gradcheck };

std::string_view to_string(Command command);
Command parse_command(std::string_view name);

/// `<out_root>/<tag>-seed<seed>`; every file a command writes lands here.
std::filesystem::path run_directory(const RunConfig& config,
                                    const std::filesystem::path& out_root);

/// Runs `command` and writes its artifacts plus the echoed config.txt under
/// run_directory(). Human-readable progress goes to `log`. Returns the exit
/// status; library errors propagate as dml::Error.
int dispatch(Command command, const RunConfig& config,
             const std::filesystem::path& out_root, std::ostream& log);

}  // namespace dml
