#pragma once

// Runs the desm binary in a scratch directory and captures its output.

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace desm::testing {

struct RunResult {
  int code = -1;
  std::string out;
};

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

class CliHarness {
 public:
  explicit CliHarness(const std::string& name)
      : dir_(std::filesystem::temp_directory_path() / ("desm_cli_" + name)) {
    std::filesystem::remove_all(dir_);
    std::filesystem::create_directories(dir_);
  }
  ~CliHarness() { std::filesystem::remove_all(dir_); }

  std::filesystem::path path(const std::string& f) const { return dir_ / f; }
  static std::string demo(const std::string& f) { return std::string(DESM_DEMO_DIR) + "/" + f; }

  /// `args` is appended to the binary path verbatim (shell syntax allowed).
  RunResult run(const std::string& args) const {
    std::string cmd = "cd '" + dir_.string() + "' && DESM_LOG=error '" DESM_BIN "' " + args +
                      " 2>stderr.txt";
    RunResult r;
    FILE* p = popen(cmd.c_str(), "r");
    if (!p) return r;
    char buf[4096];
    size_t n;
    while ((n = fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
    int status = pclose(p);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
  }

  std::string stderr_text() const { return read_file(dir_ / "stderr.txt"); }

 private:
  std::filesystem::path dir_;
};

}  // namespace desm::testing
