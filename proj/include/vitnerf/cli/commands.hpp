#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace vitnerf::cli {

struct CommandOptions {
  std::string verb;
  std::string config;
  std::string scene;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<long long> steps;
  std::optional<int> input_view;
  int orbit_n = 1;
  std::optional<double> orbit_radius;
  double orbit_elevation = 0.0;
  std::vector<std::string> overrides;
  std::string checkpoint;
  std::string image;
  std::string split;
  bool bypass_model = false;
};

/// Parses argv and runs the verb. Errors become a single "error: ..." line on
/// `err` and a nonzero return.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Verb implementations; they throw on failure.
void train(const CommandOptions& opts, std::ostream& out);
void render(const CommandOptions& opts, std::ostream& out);
void eval(const CommandOptions& opts, std::ostream& out);
/// Returns false if any check failed.
bool gradcheck(const CommandOptions& opts, std::ostream& out);
void make_synthetic(const CommandOptions& opts, std::ostream& out);

}  // namespace vitnerf::cli
