#pragma once

#include "kaisar/checker.hpp"
#include "kaisar/parser.hpp"
#include "kaisar/semantics.hpp"

namespace kaisar {

// ---------------------------------------------------------------------------
// Source files: `theorem <name> <formula> proof <SP> end`, repeated.
struct Declaration {
  std::string name;
  FormulaPtr theorem;
  SPPtr proof;
  int line = 0;
};

struct SourceFile {
  std::string path;
  std::vector<Declaration> decls;
};

SourceFile parse_source(const std::string& text, const std::string& path = "");

// Single proof script / pattern, for tests and tools.
SPPtr parse_proof_script(const std::string& text);
PatternPtr parse_pattern_text(const std::string& text);

// Canonical text of a parsed file (idempotent: printing a re-parse of the
// output reproduces it byte for byte).
std::string print_source(const SourceFile& f);
std::string print_proof(const SPPtr& sp, int indent = 0);

// ---------------------------------------------------------------------------
// Diagnostics and file checking.
struct Diagnostic {
  enum Severity { Error, Warning, Note };
  Severity severity = Error;
  int line = 0;
  std::string code;
  std::string message;
};

std::string diag_str(const Diagnostic& d);

struct Config {
  CheckOptions check;
  Budget budget;          // simulate command
  bool json = false;
  bool write_cert = true;
};

struct TheoremOutcome {
  std::string name;
  CheckResult result;
};

struct FileOutcome {
  // 0: accepted; 1: proof/parse failure; 2: undecided leaves need an
  // external oracle; 3: usage error.
  int exit_code = 0;
  std::vector<Diagnostic> diags;
  std::vector<TheoremOutcome> theorems;
};

FileOutcome check_file(const std::string& path, const Config& cfg);

// `kaisar <check|trace|simulate|nominalize|replay> ...`
int cli_main(int argc, char** argv);

}  // namespace kaisar
