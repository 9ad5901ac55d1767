#include "kaisar/frontend.hpp"

#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

namespace kaisar {

// ---------------------------------------------------------------------------
// Keywords.

namespace {

const std::set<std::string>& stmt_keywords() {
  static const std::set<std::string> kws = {
      "assume", "assert", "show",  "have",    "note",  "let",
      "state",  "inv",    "ghost", "finally", "case",  "after",
      "focus",  "solve",  "assign", "con"};
  return kws;
}

const std::set<std::string>& reserved_words() {
  static const std::set<std::string> kws = [] {
    std::set<std::string> s = stmt_keywords();
    for (const char* w : {"using", "by", "then", "theorem", "proof", "end",
                          "Pre", "Ind", "Post", "dur", "Inv"})
      s.insert(w);
    return s;
  }();
  return kws;
}

bool at_stmt_kw(const Tokens& ts) {
  const Token& t = ts.peek();
  return t.kind == Token::Ident && stmt_keywords().count(t.text);
}

bool at_boundary(const Tokens& ts) {
  const Token& t = ts.peek();
  if (t.kind == Token::End) return true;
  if (t.kind == Token::Sym && (t.text == "}" || t.text == "|")) return true;
  return t.kind == Token::Ident && reserved_words().count(t.text);
}

std::string ident_at(Tokens& ts, const char* what) {
  const Token& t = ts.peek();
  if (t.kind != Token::Ident || reserved_words().count(t.text))
    ts.fail(std::string("expected ") + what);
  return ts.next().text;
}

// ---------------------------------------------------------------------------
// Patterns from parsed expressions: bare identifiers select/bind whole
// expressions, everything else is structural with embedded holes.

PatternPtr to_fpattern(const FormulaPtr& f0) {
  FormulaPtr f = as_proof_formula(f0);
  if (f->kind == FormulaKind::AbbrevF) return pat_ident(f->name);
  return pat_struct(expr_of(f));
}

PatternPtr to_tpattern(const TermPtr& t0) {
  TermPtr t = as_proof_term(t0);
  if (t->kind == TermKind::Abbrev) return pat_ident(t->name);
  return pat_struct(expr_of(t));
}

PatternPtr to_ppattern(const ProgramPtr& p) {
  return pat_struct(expr_of(as_proof_program(p)));
}

// Term or formula, disambiguated by what parses up to a statement boundary.
Expr parse_expr_at(Tokens& ts) {
  size_t p = ts.pos();
  try {
    TermPtr t = parse_term_at(ts);
    if (at_boundary(ts)) return expr_of(as_proof_term(t));
  } catch (const ParseError&) {
  }
  ts.rewind(p);
  return expr_of(as_proof_formula(parse_formula_at(ts)));
}

PatternPtr parse_fpattern(Tokens& ts) {
  return to_fpattern(parse_formula_at(ts));
}

// Formula pattern or program pattern (case branches, solve targets).
PatternPtr parse_branch_pattern(Tokens& ts) {
  size_t p = ts.pos();
  try {
    FormulaPtr f = parse_formula_at(ts);
    if (ts.at("=>") || at_boundary(ts) || ts.at(":")) return to_fpattern(f);
  } catch (const ParseError&) {
  }
  ts.rewind(p);
  return to_ppattern(parse_program_at(ts));
}

// ---------------------------------------------------------------------------
// Forward proofs: `head a b c`, arguments by juxtaposition; identifiers are
// fact references with a term reading, parenthesized terms are term
// arguments.

FPPtr fp_atom_of_ident(const std::string& name) {
  TermPtr reading;
  Variable v = variable_of_ident(name);
  reading = (name == "_" || (name.size() > 1 && name.back() == '_'))
                ? tabbrev(name)
                : tvar(v);
  return fp_fact(pat_ident(name), reading);
}

FPPtr parse_fp(Tokens& ts) {
  FPPtr fp;
  for (;;) {
    const Token& t = ts.peek();
    FPPtr atom;
    if (t.kind == Token::Ident && !reserved_words().count(t.text)) {
      atom = fp_atom_of_ident(ts.next().text);
    } else if (ts.at("(")) {
      ts.next();
      TermPtr term = as_proof_term(parse_term_at(ts));
      ts.expect(")");
      atom = fp_fact(nullptr, term);
    } else {
      break;
    }
    fp = fp ? fp_app(fp, atom) : atom;
  }
  if (!fp) ts.fail("expected a forward proof");
  return fp;
}

// ---------------------------------------------------------------------------
// Methods.

Method parse_method_tail(Tokens& ts) {
  Method m;
  if (ts.accept("using")) {
    while (!ts.at("by")) m.use_pats.push_back(parse_fpattern(ts));
  }
  ts.expect("by");
  const Token& t = ts.peek();
  if (t.kind != Token::Ident) ts.fail("expected a proof method");
  std::string name = ts.next().text;
  if (name == "R")
    m.kind = MethodKind::R;
  else if (name == "id")
    m.kind = MethodKind::Id;
  else if (name == "auto")
    m.kind = MethodKind::Auto;
  else
    ts.fail("unknown proof method `" + name + "`");
  return m;
}

// ---------------------------------------------------------------------------
// Structured proofs.

SPPtr parse_sp(Tokens& ts);

SPPtr method_show(MethodKind k, int line) {
  StructuredProof sp;
  sp.kind = SPKind::Show;
  sp.method.kind = k;
  sp.line = line;
  return sp_node(std::move(sp));
}

// A branch / Pre / Ind body: `{ SP }`, a bare method name, or a statement
// chain.
SPPtr parse_body(Tokens& ts) {
  if (ts.accept("{")) {
    SPPtr sp = parse_sp(ts);
    ts.expect("}");
    return sp;
  }
  const Token& t = ts.peek();
  if (t.kind == Token::Ident &&
      (t.text == "R" || t.text == "id" || t.text == "auto")) {
    const Token& after = ts.peek(1);
    bool ends = after.kind == Token::End ||
                (after.kind == Token::Sym &&
                 (after.text == "}" || after.text == "|")) ||
                (after.kind == Token::Ident &&
                 reserved_words().count(after.text));
    if (ends) {
      int line = t.line;
      std::string name = ts.next().text;
      return method_show(name == "R"     ? MethodKind::R
                         : name == "id" ? MethodKind::Id
                                        : MethodKind::Auto,
                         line);
    }
  }
  return parse_sp(ts);
}

std::optional<std::string> binder_at(Tokens& ts) {
  const Token& t = ts.peek();
  if (t.kind == Token::Ident && !reserved_words().count(t.text) &&
      ts.peek(1).kind == Token::Sym && ts.peek(1).text == ":") {
    std::string name = ts.next().text;
    ts.next();  // ':'
    return name;
  }
  return std::nullopt;
}

SPPtr parse_case(Tokens& ts, int line) {
  StructuredProof sp;
  sp.kind = SPKind::Case;
  sp.line = line;
  for (;;) {
    CaseBranch br;
    br.pat = parse_branch_pattern(ts);
    ts.expect("=>");
    br.sp = parse_body(ts);
    sp.branches.push_back(std::move(br));
    if (ts.accept("|")) continue;
    if (ts.at("case")) {
      ts.next();
      continue;
    }
    break;
  }
  return sp_node(std::move(sp));
}

SPPtr parse_inv_chain(Tokens& ts, int line) {
  StructuredProof sp;
  sp.line = line;
  if (ts.accept("ghost")) {
    sp.kind = SPKind::Ghost;
    sp.var = variable_of_ident(ident_at(ts, "ghost variable"));
    ts.expect("=");
    sp.term2 = as_proof_term(parse_term_at(ts));  // initial value
    ts.expect(",");
    std::string again = ident_at(ts, "ghost variable");
    if (!(variable_of_ident(again) == sp.var))
      ts.fail("ghost derivative names a different variable");
    ts.expect("'");
    ts.expect("=");
    sp.term = as_proof_term(parse_term_at(ts));  // derivative
    sp.tail = parse_sp(ts);
    return sp_node(std::move(sp));
  }
  ts.expect("inv");
  sp.kind = SPKind::Inv;
  sp.name = ident_at(ts, "invariant name");
  ts.expect(":");
  sp.expr = expr_of(as_proof_formula(parse_formula_at(ts)));
  if (ts.accept("{")) {
    while (!ts.at("}")) {
      if (ts.accept("Pre")) {
        ts.expect("=>");
        sp.sp1 = parse_body(ts);
      } else if (ts.accept("Ind")) {
        ts.expect("=>");
        sp.sp2 = parse_body(ts);
      } else {
        ts.fail("expected Pre or Ind");
      }
      ts.accept("|");
    }
    ts.expect("}");
  }
  sp.tail = parse_sp(ts);
  return sp_node(std::move(sp));
}

SPPtr parse_sp(Tokens& ts) {
  const Token& t = ts.peek();
  if (t.kind != Token::Ident || !stmt_keywords().count(t.text))
    ts.fail("expected a proof statement");
  int line = t.line;
  if (t.text == "inv" || t.text == "ghost") return parse_inv_chain(ts, line);
  std::string kw = ts.next().text;

  StructuredProof sp;
  sp.line = line;
  if (kw == "assume" || kw == "assert") {
    sp.kind = SPKind::Assume;
    if (auto n = binder_at(ts)) sp.name = *n;
    sp.pat = parse_fpattern(ts);
    sp.sp1 = parse_sp(ts);
  } else if (kw == "show") {
    sp.kind = SPKind::Show;
    sp.pat = parse_fpattern(ts);
    sp.method = parse_method_tail(ts);
  } else if (kw == "have") {
    sp.kind = SPKind::Have;
    if (auto n = binder_at(ts)) sp.name = *n;
    sp.expr = expr_of(as_proof_formula(parse_formula_at(ts)));
    if (ts.at("{")) {
      ts.next();
      sp.sp1 = parse_sp(ts);
      ts.expect("}");
    } else {
      StructuredProof sh;
      sh.kind = SPKind::Show;
      sh.line = line;
      sh.method = parse_method_tail(ts);
      sp.sp1 = sp_node(std::move(sh));
    }
    sp.sp2 = parse_sp(ts);
  } else if (kw == "note") {
    sp.kind = SPKind::Note;
    sp.name = ident_at(ts, "fact name");
    ts.expect("=");
    sp.fp = parse_fp(ts);
    sp.sp1 = parse_sp(ts);
  } else if (kw == "let") {
    const Token& a = ts.peek();
    bool funlet = a.kind == Token::Ident && ts.peek(1).text == "(" &&
                  ts.peek(2).kind == Token::Ident && ts.peek(3).text == ")" &&
                  ts.peek(4).text == "=";
    if (funlet) {
      sp.kind = SPKind::FunLet;
      sp.arg = ts.next().text;  // formal state argument
      ts.expect("(");
      sp.name = ident_at(ts, "abbreviation name");
      ts.expect(")");
      ts.expect("=");
      std::string again = ident_at(ts, "state argument");
      if (again != sp.arg) ts.fail("state argument names differ");
      ts.expect("(");
      size_t p = ts.pos();
      try {
        TermPtr body = parse_term_at(ts);
        if (ts.at(")")) {
          sp.expr = expr_of(as_proof_term(body));
        } else {
          throw ParseError("not a term", 0, 0);
        }
      } catch (const ParseError&) {
        ts.rewind(p);
        sp.expr = expr_of(as_proof_formula(parse_formula_at(ts)));
      }
      ts.expect(")");
    } else {
      sp.kind = SPKind::Let;
      sp.pat = to_tpattern(parse_term_at(ts));
      ts.expect("=");
      sp.expr = parse_expr_at(ts);
    }
    sp.sp1 = parse_sp(ts);
  } else if (kw == "state") {
    sp.kind = SPKind::State;
    sp.name = ident_at(ts, "state name");
    sp.sp1 = parse_sp(ts);
  } else if (kw == "assign") {
    sp.var = variable_of_ident(ident_at(ts, "assigned variable"));
    ts.expect(":=");
    if (ts.accept("*")) {
      sp.kind = SPKind::AssignAny;
    } else {
      sp.kind = SPKind::Assign;
      sp.term = as_proof_term(parse_term_at(ts));
    }
    sp.sp1 = parse_sp(ts);
  } else if (kw == "case") {
    return parse_case(ts, line);
  } else if (kw == "after") {
    sp.kind = SPKind::After;
    ts.expect("{");
    sp.sp1 = parse_sp(ts);
    ts.expect("}");
    ts.expect("have");
    if (auto n = binder_at(ts)) sp.name = *n;
    sp.expr = expr_of(as_proof_formula(parse_formula_at(ts)));
    ts.expect("then");
    ts.expect("{");
    sp.sp2 = parse_sp(ts);
    ts.expect("}");
  } else if (kw == "focus") {
    sp.kind = SPKind::Focus;
    sp.pat = parse_fpattern(ts);
    sp.sp1 = parse_sp(ts);
  } else if (kw == "solve") {
    sp.kind = SPKind::Solve;
    if (ts.at("_") && !(ts.peek(1).text == "(")) {
      ts.next();
      sp.pat = pat_any();
    } else {
      sp.pat = parse_branch_pattern(ts);
    }
    if (ts.accept("dur")) {
      ts.expect(":");
      sp.term = as_proof_term(parse_term_at(ts));
    }
    if (!ts.accept("t")) ts.fail("expected `t:` label");
    ts.expect(":");
    sp.pat2 = parse_fpattern(ts);
    if (!ts.accept("dom")) ts.fail("expected `dom:` label");
    ts.expect(":");
    sp.pat3 = parse_fpattern(ts);
    if (ts.at("{")) {
      ts.next();
      sp.sp2 = parse_sp(ts);
      ts.expect("}");
    }
    sp.sp1 = parse_sp(ts);
  } else if (kw == "finally") {
    sp.kind = SPKind::Finally;
    sp.sp1 = parse_sp(ts);
  } else if (kw == "con") {
    sp.kind = SPKind::Con;
    sp.var = variable_of_ident(ident_at(ts, "variant variable"));
    ts.expect(":");
    sp.expr = expr_of(as_proof_formula(parse_formula_at(ts)));
    ts.expect("{");
    ts.expect("Pre");
    ts.expect("=>");
    sp.sp1 = parse_body(ts);
    ts.accept("|");
    ts.expect("Inv");
    ts.expect("=>");
    sp.sp2 = parse_body(ts);
    ts.accept("|");
    ts.expect("Post");
    ts.expect("=>");
    sp.tail = parse_body(ts);
    ts.expect("}");
  } else {
    ts.fail("unexpected keyword `" + kw + "`");
  }
  return sp_node(std::move(sp));
}

}  // namespace

// ---------------------------------------------------------------------------
// Entry points.

SPPtr parse_proof_script(const std::string& text) {
  Tokens ts(text);
  SPPtr sp = parse_sp(ts);
  if (!ts.done()) ts.fail("trailing input after proof");
  return sp;
}

PatternPtr parse_pattern_text(const std::string& text) {
  Tokens ts(text);
  PatternPtr p = parse_branch_pattern(ts);
  if (!ts.done()) ts.fail("trailing input after pattern");
  return p;
}

SourceFile parse_source(const std::string& text, const std::string& path) {
  SourceFile f;
  f.path = path;
  Tokens ts(text);
  while (!ts.done()) {
    Declaration d;
    d.line = ts.peek().line;
    ts.expect("theorem");
    d.name = ident_at(ts, "theorem name");
    d.theorem = as_proof_formula(parse_formula_at(ts));
    ts.expect("proof");
    d.proof = parse_sp(ts);
    ts.expect("end");
    f.decls.push_back(std::move(d));
  }
  if (f.decls.empty()) {
    Tokens empty(text);
    empty.fail("no theorems in file");
  }
  return f;
}

// ---------------------------------------------------------------------------
// Printing (canonical layout; idempotent under reparse).

namespace {

std::string pexpr(const Expr& e) {
  if (e.term) return print(e.term);
  if (e.fml) return print(e.fml);
  if (e.prog) return print(e.prog);
  return "_";
}

std::string pfp(const FPPtr& fp) {
  switch (fp->kind) {
    case FPKind::Fact:
      if (fp->pat) return print(fp->pat);
      return "(" + print(fp->term) + ")";
    case FPKind::App:
      return pfp(fp->fn) + " " + pfp(fp->arg);
    case FPKind::Inst:
      return pfp(fp->fn) + " (" + print(fp->term) + ")";
  }
  return "?";
}

std::string pmethod(const Method& m) {
  std::string s;
  if (!m.use_pats.empty()) {
    s += "using";
    for (auto& p : m.use_pats) s += " " + print(p);
    s += " ";
  }
  s += "by ";
  s += m.kind == MethodKind::R ? "R" : m.kind == MethodKind::Id ? "id" : "auto";
  return s;
}

void pp(const SPPtr& sp, int ind, std::string& out);

void pp_block(const SPPtr& sp, int ind, std::string& out) {
  out += "{\n";
  pp(sp, ind + 2, out);
  out.append(ind, ' ');
  out += "}";
}

void pp(const SPPtr& sp, int ind, std::string& out) {
  if (!sp) return;
  std::string pad(ind, ' ');
  switch (sp->kind) {
    case SPKind::Assume:
      out += pad + "assume " +
             (sp->name.empty() ? "" : sp->name + ": ") + print(sp->pat) + "\n";
      pp(sp->sp1, ind, out);
      return;
    case SPKind::Show: {
      out += pad + "show " + (sp->pat ? print(sp->pat) : "_") + " " +
             pmethod(sp->method) + "\n";
      return;
    }
    case SPKind::Have: {
      out += pad + "have " + (sp->name.empty() ? "" : sp->name + ": ") +
             pexpr(sp->expr);
      if (sp->sp1 && sp->sp1->kind == SPKind::Show && !sp->sp1->pat) {
        out += " " + pmethod(sp->sp1->method) + "\n";
      } else {
        out += " ";
        pp_block(sp->sp1, ind, out);
        out += "\n";
      }
      pp(sp->sp2, ind, out);
      return;
    }
    case SPKind::Note:
      out += pad + "note " + sp->name + " = " + pfp(sp->fp) + "\n";
      pp(sp->sp1, ind, out);
      return;
    case SPKind::Let:
      out += pad + "let " + print(sp->pat) + " = " + pexpr(sp->expr) + "\n";
      pp(sp->sp1, ind, out);
      return;
    case SPKind::FunLet:
      out += pad + "let " + sp->arg + "(" + sp->name + ") = " + sp->arg + "(" +
             pexpr(sp->expr) + ")\n";
      pp(sp->sp1, ind, out);
      return;
    case SPKind::State:
      out += pad + "state " + sp->name + "\n";
      pp(sp->sp1, ind, out);
      return;
    case SPKind::Assign:
      out += pad + "assign " + sp->var.str() + " := " + print(sp->term) + "\n";
      pp(sp->sp1, ind, out);
      return;
    case SPKind::AssignAny:
      out += pad + "assign " + sp->var.str() + " := *\n";
      pp(sp->sp1, ind, out);
      return;
    case SPKind::Case:
      for (auto& br : sp->branches) {
        out += pad + "case " + (br.pat ? print(br.pat) : "_") + " => ";
        pp_block(br.sp, ind, out);
        out += "\n";
      }
      return;
    case SPKind::After:
      out += pad + "after ";
      pp_block(sp->sp1, ind, out);
      out += "\n" + pad + "have " +
             (sp->name.empty() ? "" : sp->name + ": ") + pexpr(sp->expr) +
             "\n" + pad + "then ";
      pp_block(sp->sp2, ind, out);
      out += "\n";
      return;
    case SPKind::Focus:
      out += pad + "focus " + print(sp->pat) + "\n";
      pp(sp->sp1, ind, out);
      return;
    case SPKind::Solve: {
      out += pad + "solve " + (sp->pat ? print(sp->pat) : "_");
      if (sp->term) out += " dur: " + print(sp->term);
      out += " t: " + print(sp->pat2) + " dom: " + print(sp->pat3);
      if (sp->sp2) {
        out += " ";
        pp_block(sp->sp2, ind, out);
      }
      out += "\n";
      pp(sp->sp1, ind, out);
      return;
    }
    case SPKind::Inv: {
      out += pad + "inv " + sp->name + ": " + pexpr(sp->expr);
      if (sp->sp1 || sp->sp2) {
        out += " {\n";
        if (sp->sp1) {
          out += pad + "  Pre => ";
          pp_block(sp->sp1, ind + 2, out);
          out += "\n";
        }
        if (sp->sp2) {
          out += pad + "  Ind => ";
          pp_block(sp->sp2, ind + 2, out);
          out += "\n";
        }
        out += pad + "}";
      }
      out += "\n";
      pp(sp->tail, ind, out);
      return;
    }
    case SPKind::Ghost:
      out += pad + "ghost " + sp->var.str() + " = " + print(sp->term2) + ", " +
             sp->var.str() + "' = " + print(sp->term) + "\n";
      pp(sp->tail, ind, out);
      return;
    case SPKind::Finally:
      out += pad + "finally\n";
      pp(sp->sp1, ind, out);
      return;
    case SPKind::Con:
      out += pad + "con " + sp->var.str() + ": " + pexpr(sp->expr) + " {\n";
      out += pad + "  Pre => ";
      pp_block(sp->sp1, ind + 2, out);
      out += "\n" + pad + "  Inv => ";
      pp_block(sp->sp2, ind + 2, out);
      out += "\n" + pad + "  Post => ";
      pp_block(sp->tail, ind + 2, out);
      out += "\n" + pad + "}\n";
      return;
  }
}

}  // namespace

std::string print_proof(const SPPtr& sp, int indent) {
  std::string out;
  pp(sp, indent, out);
  return out;
}

std::string print_source(const SourceFile& f) {
  std::string out;
  for (auto& d : f.decls) {
    out += "theorem " + d.name + "\n  " + print(d.theorem) + "\nproof\n";
    out += print_proof(d.proof, 2);
    out += "end\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// File checking.

std::string diag_str(const Diagnostic& d) {
  const char* sev = d.severity == Diagnostic::Error     ? "error"
                    : d.severity == Diagnostic::Warning ? "warning"
                                                        : "note";
  std::string s = std::string(sev);
  if (d.line > 0) s += " (line " + std::to_string(d.line) + ")";
  if (!d.code.empty()) s += " [" + d.code + "]";
  return s + ": " + d.message;
}

namespace {

Diagnostic diag_of_error(const std::string& msg, const std::string& code) {
  Diagnostic d;
  d.code = code;
  d.message = msg;
  // Checker errors are prefixed "line N: ".
  if (msg.rfind("line ", 0) == 0) {
    size_t colon = msg.find(':');
    if (colon != std::string::npos) {
      d.line = std::atoi(msg.c_str() + 5);
      size_t start = colon + 1;
      while (start < msg.size() && msg[start] == ' ') ++start;
      d.message = msg.substr(start);
    }
  }
  return d;
}

std::string cert_path_for(const std::string& src, const std::string& name) {
  size_t slash = src.find_last_of('/');
  std::string dir = slash == std::string::npos ? "" : src.substr(0, slash + 1);
  return dir + name + ".cert";
}

}  // namespace

FileOutcome check_file(const std::string& path, const Config& cfg) {
  FileOutcome out;
  std::ifstream in(path);
  if (!in) {
    out.exit_code = 3;
    out.diags.push_back({Diagnostic::Error, 0, "io", "cannot read " + path});
    return out;
  }
  std::stringstream ss;
  ss << in.rdbuf();
  SourceFile src;
  try {
    src = parse_source(ss.str(), path);
  } catch (const ParseError& e) {
    out.exit_code = 1;
    out.diags.push_back(
        {Diagnostic::Error, e.line, "syntax", std::string(e.what())});
    return out;
  }
  bool any_hard = false, any_oracle = false;
  for (auto& d : src.decls) {
    CheckResult r = check_theorem(d.theorem, d.proof, cfg.check);
    if (r.ok && cfg.write_cert) {
      std::ofstream co(cert_path_for(path, d.name));
      co << serialize(r.cert);
    }
    if (!r.ok) {
      (r.needs_oracle ? any_oracle : any_hard) = true;
      for (auto& e : r.errors) {
        Diagnostic dg =
            diag_of_error(e, r.needs_oracle ? "oracle" : "proof");
        dg.message = d.name + ": " + dg.message;
        out.diags.push_back(std::move(dg));
      }
    }
    out.theorems.push_back({d.name, std::move(r)});
  }
  out.exit_code = any_hard ? 1 : any_oracle ? 2 : 0;
  return out;
}

// ---------------------------------------------------------------------------
// CLI.

namespace {

int usage(const std::string& msg = "") {
  if (!msg.empty()) std::cerr << "error: " << msg << "\n";
  std::cerr
      << "usage: kaisar <command> [flags] <file>...\n"
         "commands:\n"
         "  check       check proof files (exit 0 ok, 1 failed, 2 needs "
         "oracle)\n"
         "  trace       check and dump static-trace evolution\n"
         "  simulate    sample random runs against each theorem\n"
         "  nominalize  print each theorem's program with state-marker tests\n"
         "  replay      re-verify a saved certificate\n"
         "flags: --oracle-cmd CMD --oracle-timeout SEC --paths N --iters N\n"
         "       --reals N --step H --seed N --auto-steps N --eq-assign\n"
         "       --json --no-cert --recheck --config FILE\n";
  return 3;
}

std::string json_escape(const std::string& s) {
  std::string o;
  for (char c : s) {
    if (c == '"' || c == '\\') {
      o += '\\';
      o += c;
    } else if (c == '\n') {
      o += "\\n";
    } else {
      o += c;
    }
  }
  return o;
}

void print_outcome(const std::string& path, const FileOutcome& out,
                   bool json) {
  if (json) {
    std::cout << "{\"file\":\"" << json_escape(path) << "\",\"exit\":"
              << out.exit_code << ",\"diagnostics\":[";
    for (size_t i = 0; i < out.diags.size(); ++i) {
      const Diagnostic& d = out.diags[i];
      std::cout << (i ? "," : "") << "{\"line\":" << d.line << ",\"code\":\""
                << json_escape(d.code) << "\",\"message\":\""
                << json_escape(d.message) << "\"}";
    }
    std::cout << "]}\n";
    return;
  }
  for (auto& d : out.diags) std::cout << path << ": " << diag_str(d) << "\n";
  for (auto& t : out.theorems)
    std::cout << path << ": " << t.name << ": "
              << (t.result.ok            ? "accepted"
                  : t.result.needs_oracle ? "needs oracle"
                                          : "failed")
              << "\n";
}

bool apply_config_pair(Config& cfg, const std::string& key,
                       const std::string& val) {
  try {
    if (key == "oracle_cmd")
      cfg.check.arith.oracle_cmd = val;
    else if (key == "oracle_timeout")
      cfg.check.arith.oracle_timeout = std::stod(val);
    else if (key == "linear_deadline")
      cfg.check.arith.linear_deadline = std::stod(val);
    else if (key == "falsify_samples")
      cfg.check.arith.falsify_samples = std::stoi(val);
    else if (key == "seed")
      cfg.check.arith.seed = cfg.budget.seed = std::stoull(val);
    else if (key == "auto_steps")
      cfg.check.auto_steps = std::stoi(val);
    else if (key == "eq_assign")
      cfg.check.eq_always = val == "1" || val == "true";
    else if (key == "paths")
      cfg.budget.paths = std::stoi(val);
    else if (key == "iters")
      cfg.budget.iterations = std::stoi(val);
    else if (key == "reals")
      cfg.budget.reals = std::stoi(val);
    else if (key == "step")
      cfg.budget.step = std::stod(val);
    else
      return false;
  } catch (const std::exception&) {
    return false;
  }
  return true;
}

std::string trace_line(const StaticTrace& h) {
  std::string s;
  for (auto& r : h.records) {
    if (!s.empty()) s += "; ";
    switch (r.kind) {
      case RecordKind::Sub:
        s += "SUB " + r.var.str() + " := " + print(r.term);
        break;
      case RecordKind::Eq:
        s += "EQ " + r.var.str() + " ~ " + r.ghost.str() + " := " +
             print(r.term);
        break;
      case RecordKind::Any:
        s += "ANY " + r.var.str() + " ~ " + r.ghost.str();
        break;
      case RecordKind::Mark:
        s += "MARK " + r.mark;
        break;
    }
  }
  return s.empty() ? "(empty)" : s;
}

FormulaPtr strip_assumptions(FormulaPtr f) {
  while (f && f->kind == FormulaKind::Imply) f = f->f2;
  return f;
}

int cmd_simulate(const std::vector<std::string>& files, const Config& cfg) {
  int worst = 0;
  for (auto& path : files) {
    std::ifstream in(path);
    if (!in) return usage("cannot read " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    SourceFile src;
    try {
      src = parse_source(ss.str(), path);
    } catch (const ParseError& e) {
      std::cout << path << ": syntax error line " << e.line << ": " << e.what()
                << "\n";
      worst = std::max(worst, 1);
      continue;
    }
    for (auto& d : src.decls) {
      std::mt19937_64 rng(cfg.budget.seed);
      VarSet fv = free_vars(d.theorem);
      int cex = 0;
      for (int k = 0; k < cfg.budget.paths; ++k) {
        State s(Mode::Exact);
        for (auto& v : fv)
          if (!v.primed) s.set(v, sample_rational(rng));
        TV tv;
        try {
          tv = eval_formula(d.theorem, s, cfg.budget, {}, &rng);
        } catch (const EvalError&) {
          tv = TV::Unknown;
        }
        if (tv == TV::False) ++cex;
      }
      std::cout << path << ": " << d.name << ": " << cex
                << " counterexamples / " << cfg.budget.paths << " runs\n";
      if (cex > 0) worst = std::max(worst, 1);
    }
  }
  return worst;
}

int cmd_nominalize(const std::vector<std::string>& files) {
  int worst = 0;
  for (auto& path : files) {
    std::ifstream in(path);
    if (!in) return usage("cannot read " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    try {
      SourceFile src = parse_source(ss.str(), path);
      for (auto& d : src.decls) {
        FormulaPtr body = strip_assumptions(d.theorem);
        if (!body || (body->kind != FormulaKind::Box &&
                      body->kind != FormulaKind::Diamond)) {
          std::cout << path << ": " << d.name
                    << ": theorem has no top-level modality\n";
          worst = std::max(worst, 1);
          continue;
        }
        // Assumptions and context steps before the modality's proof consume
        // implications, not program steps; states there prefix the program
        // with marker tests.
        SPPtr sp = d.proof;
        std::vector<std::string> marks;
        while (sp &&
               (sp->kind == SPKind::Assume || sp->kind == SPKind::Let ||
                sp->kind == SPKind::FunLet || sp->kind == SPKind::Note ||
                sp->kind == SPKind::State)) {
          if (sp->kind == SPKind::State) marks.push_back(sp->name);
          sp = sp->sp1;
        }
        ProgramPtr prog = nominalize(body->prog, sp);
        for (auto it = marks.rbegin(); it != marks.rend(); ++it)
          prog = pseq(ptest(fnominal(*it)), prog);
        std::cout << path << ": " << d.name << ": " << print(prog) << "\n";
      }
    } catch (const std::exception& e) {
      std::cout << path << ": " << e.what() << "\n";
      worst = std::max(worst, 1);
    }
  }
  return worst;
}

int cmd_replay(const std::vector<std::string>& files, const Config& cfg,
               bool recheck) {
  int worst = 0;
  for (auto& path : files) {
    std::ifstream in(path);
    if (!in) return usage("cannot read " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    try {
      Certificate c = parse_certificate(ss.str());
      ReplayOptions ro;
      if (recheck) ro.recheck_arith = &cfg.check.arith;
      ReplayResult r = replay(c, ro);
      if (r.valid) {
        std::cout << path << ": Valid\n";
      } else {
        std::cout << path << ": Invalid at step " << r.failed_step << ": "
                  << r.detail << "\n";
        worst = std::max(worst, 1);
      }
    } catch (const std::exception& e) {
      std::cout << path << ": malformed certificate: " << e.what() << "\n";
      worst = std::max(worst, 1);
    }
  }
  return worst;
}

}  // namespace

int cli_main(int argc, char** argv) {
  if (argc < 2) return usage();
  std::string cmd = argv[1];
  Config cfg;
  bool recheck = false;
  std::vector<std::string> files;
  for (int i = 2; i < argc; ++i) {
    std::string a = argv[i];
    auto need = [&](const char* flag) -> std::string {
      if (i + 1 >= argc) {
        usage(std::string(flag) + " needs a value");
        return "";
      }
      return argv[++i];
    };
    if (a == "--oracle-cmd")
      cfg.check.arith.oracle_cmd = need(a.c_str());
    else if (a == "--oracle-timeout")
      cfg.check.arith.oracle_timeout = std::stod(need(a.c_str()));
    else if (a == "--paths")
      cfg.budget.paths = std::stoi(need(a.c_str()));
    else if (a == "--iters")
      cfg.budget.iterations = std::stoi(need(a.c_str()));
    else if (a == "--reals")
      cfg.budget.reals = std::stoi(need(a.c_str()));
    else if (a == "--step")
      cfg.budget.step = std::stod(need(a.c_str()));
    else if (a == "--seed")
      cfg.check.arith.seed = cfg.budget.seed = std::stoull(need(a.c_str()));
    else if (a == "--auto-steps")
      cfg.check.auto_steps = std::stoi(need(a.c_str()));
    else if (a == "--eq-assign")
      cfg.check.eq_always = true;
    else if (a == "--json")
      cfg.json = true;
    else if (a == "--no-cert")
      cfg.write_cert = false;
    else if (a == "--recheck")
      recheck = true;
    else if (a == "--config") {
      std::ifstream c(need(a.c_str()));
      if (!c) return usage("cannot read config file");
      std::string ln;
      while (std::getline(c, ln)) {
        if (ln.empty() || ln[0] == '#') continue;
        size_t eq = ln.find('=');
        if (eq == std::string::npos) return usage("bad config line: " + ln);
        if (!apply_config_pair(cfg, ln.substr(0, eq), ln.substr(eq + 1)))
          return usage("bad config key: " + ln.substr(0, eq));
      }
    } else if (!a.empty() && a[0] == '-') {
      return usage("unknown flag " + a);
    } else {
      files.push_back(a);
    }
  }
  if (files.empty()) return usage("no input files");

  if (cmd == "check" || cmd == "trace") {
    if (cmd == "trace")
      cfg.check.trace_hook = [](const StaticTrace& h) {
        std::cout << "TRACE: " << trace_line(h) << "\n";
      };
    int worst = 0;
    for (auto& f : files) {
      FileOutcome out = check_file(f, cfg);
      print_outcome(f, out, cfg.json);
      worst = std::max(worst, out.exit_code);
    }
    return worst;
  }
  if (cmd == "simulate") return cmd_simulate(files, cfg);
  if (cmd == "nominalize") return cmd_nominalize(files);
  if (cmd == "replay") return cmd_replay(files, cfg, recheck);
  return usage("unknown command " + cmd);
}

}  // namespace kaisar
