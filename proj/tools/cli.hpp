#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "autocode/core.hpp"

namespace autocode::cli {

// Distinct process exit codes, one per failure class.
enum ExitCode : int {
  kOk = 0,
  kUsage = 2,         // unknown flag, bad subcommand, malformed override
  kConfig = 3,        // unreadable or invalid config file
  kMissingInput = 4,  // an input file does not exist
  kInvalid = 5,       // inputs exist but are inconsistent or malformed
  kRunExists = 6,     // run directory not empty and --force absent
  kIo = 7,            // write failure
  kEndpoint = 8,      // inference endpoint or sandbox failure
  kInternal = 9,
};

// Provenance of one CLI invocation, written as manifest.json in its run
// directory.
struct RunManifest {
  std::string command;
  std::vector<std::string> argv;
  json config;
  std::string config_hash;
  std::vector<std::string> overrides;
  std::uint64_t seed = 0;
  std::string revision;
  std::string started_at;
  std::string finished_at;
  std::vector<std::string> artifacts;  // relative to the run directory
  std::string method;                  // train only
  std::string status = "ok";
  std::string error;
};

json to_json(const RunManifest& m);

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace autocode::cli
