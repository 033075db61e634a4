// Shared test helpers: temp directories and scripted git repositories with
// pinned author/committer timestamps.
#ifndef CHATLINES_TESTS_FIXTURES_HPP
#define CHATLINES_TESTS_FIXTURES_HPP

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "chatlines/gitbridge.hpp"

namespace fixtures {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    std::string tmpl = (fs::temp_directory_path() / "chatlines-test-XXXXXX").string();
    if (mkdtemp(tmpl.data()) == nullptr)
      throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

class GitFixture {
 public:
  explicit GitFixture(fs::path repo_dir) : repo_(std::move(repo_dir)) {
    fs::create_directories(repo_);
    git({"init", "-q", "-b", "main"});
    git({"config", "user.name", "Fixture"});
    git({"config", "user.email", "fixture@example.com"});
  }

  const fs::path& repo() const { return repo_; }

  void write(const std::string& rel, const std::string& content) {
    const fs::path p = repo_ / rel;
    fs::create_directories(p.parent_path());
    std::ofstream(p, std::ios::binary) << content;
  }

  void remove(const std::string& rel) { fs::remove(repo_ / rel); }

  std::string commit_all(const std::string& message, long long epoch) {
    git({"add", "-A"});
    const std::string stamp = std::to_string(epoch) + " +0000";
    setenv("GIT_AUTHOR_DATE", stamp.c_str(), 1);
    setenv("GIT_COMMITTER_DATE", stamp.c_str(), 1);
    git({"commit", "-q", "--allow-empty", "-m", message});
    unsetenv("GIT_AUTHOR_DATE");
    unsetenv("GIT_COMMITTER_DATE");
    return rev("HEAD");
  }

  std::string merge(const std::string& branch, const std::string& message,
                    long long epoch) {
    const std::string stamp = std::to_string(epoch) + " +0000";
    setenv("GIT_AUTHOR_DATE", stamp.c_str(), 1);
    setenv("GIT_COMMITTER_DATE", stamp.c_str(), 1);
    git({"merge", "-q", "--no-ff", "-m", message, branch});
    unsetenv("GIT_AUTHOR_DATE");
    unsetenv("GIT_COMMITTER_DATE");
    return rev("HEAD");
  }

  void checkout(const std::string& ref, bool create = false) {
    if (create)
      git({"checkout", "-q", "-b", ref});
    else
      git({"checkout", "-q", ref});
  }

  std::string rev(const std::string& ref) const {
    const auto r = chatlines::run_git(repo_, {"rev-parse", ref});
    if (r.exit_code != 0) throw std::runtime_error("rev-parse failed: " + r.err);
    std::string sha = r.out;
    while (!sha.empty() && (sha.back() == '\n' || sha.back() == '\r')) sha.pop_back();
    return sha;
  }

  void git(const std::vector<std::string>& args) const {
    const auto r = chatlines::run_git(repo_, args);
    if (r.exit_code != 0)
      throw std::runtime_error("git command failed: " + r.err + r.out);
  }

 private:
  fs::path repo_;
};

}  // namespace fixtures

#endif  // CHATLINES_TESTS_FIXTURES_HPP
