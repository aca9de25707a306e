#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace llmvs {

/// Entry point of the `llmvs` tool. Returns the process exit status. On
/// failure one JSON error line {"error": {"kind": ..., "message": ...}} is
/// written to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace llmvs
