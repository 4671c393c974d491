#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "rydspec/batch.hpp"

namespace rydspec::cli {

/// Process exit status; a stable contract for pipeline callers.
enum ExitCode : int {
  exit_ok = 0,
  exit_input_error = 2,
  exit_io_error = 3,
  exit_batch_failed = 4,
};

struct CommandOptions {
  std::optional<std::string> input;
  std::optional<std::string> manifest;
  std::optional<std::string> config;
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> unit;
  std::vector<std::string> windows;  ///< "series=570,580" or "phonon=600,625"
};

int cmd_convert(const CommandOptions& opt, std::ostream& out, std::ostream& err);
int cmd_synth(const CommandOptions& opt, std::ostream& out, std::ostream& err);
int cmd_fit(const CommandOptions& opt, std::ostream& out, std::ostream& err);
int cmd_batch(const CommandOptions& opt, std::ostream& out, std::ostream& err);

/// Parses the command line and dispatches to a subcommand.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Tab-separated: site_id, nominal_size_um, shape, spectrum_path. Paths
/// are kept as written; the batch command resolves relative ones against
/// the manifest's directory.
std::vector<SiteRecord> parse_manifest(std::istream& in);

}  // namespace rydspec::cli
