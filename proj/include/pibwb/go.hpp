// Core Go frontend: AST, the two-level operational semantics (expression,
// local and global steps), and the encoding into the buffered calculus.
//
// Values are ground names. Integer literals keep their decimal spelling,
// channels are the identifiers minted by make; a value is a channel exactly
// when the channel store knows it. Simulated concurrency is data (a multiset
// of routines), never host concurrency.
#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <tuple>
#include <variant>
#include <vector>

#include "pibwb/semantics.hpp"
#include "pibwb/term.hpp"

namespace pibwb {

using GoValue = Name;

// ---------------------------------------------------------------------------
// Syntax

struct GoExpr;
using GoExprPtr = std::shared_ptr<const GoExpr>;

struct GVar {
  Name x;
};
struct GIntLit {
  long long n = 0;
};
// Channel literal. Also carries opaque received values when a select commit
// rewrites "case x = <-ch : s" into "x = v; s" (the spelling is all there is).
struct GChanLit {
  Name ch;
};
struct GMake {
  std::string elem_type;  // "int", "chan int", ...
  long long size = 0;     // 0 creates a synchronous channel
};
struct GRecv {
  GoExprPtr e;
};

using GoExprV = std::variant<GVar, GIntLit, GChanLit, GMake, GRecv>;
struct GoExpr {
  GoExprV v;
  explicit GoExpr(GoExprV val) : v(std::move(val)) {}
};
inline GoExprPtr gmk(GoExprV v) { return std::make_shared<const GoExpr>(std::move(v)); }

bool go_is_value(const GoExprPtr& e);
GoValue go_value_of(const GoExprPtr& e);  // only on values

struct GoStmt;
using GoStmtPtr = std::shared_ptr<const GoStmt>;

struct GoSelectClause {
  bool is_recv = false;
  Name x;            // receive clauses: case x = <-chan_e : body
  GoExprPtr chan_e;  // both kinds
  GoExprPtr val_e;   // send clauses: case chan_e <- val_e : body
  GoStmtPtr body;
};

struct GNil {};
struct GAssign {
  Name x;
  GoExprPtr e;
};
struct GSend {
  GoExprPtr chan_e, val_e;
};
struct GSeq {
  GoStmtPtr s1, s2;
};
struct GGoCall {
  Name f;
  std::vector<GoExprPtr> args;
};
struct GSelect {
  std::vector<GoSelectClause> clauses;
};

using GoStmtV = std::variant<GNil, GAssign, GSend, GSeq, GGoCall, GSelect>;
struct GoStmt {
  GoStmtV v;
  explicit GoStmt(GoStmtV val) : v(std::move(val)) {}
};
inline GoStmtPtr smk(GoStmtV v) { return std::make_shared<const GoStmt>(std::move(v)); }

// ---------------------------------------------------------------------------
// Stores and configurations

struct GoChan {
  long long cap = 0;           // 0 = synchronous
  std::vector<GoValue> queue;  // index 0 is the oldest element
  int gtag = 0;                // 1 = environment-visible
  bool operator==(const GoChan&) const = default;
};
using ChannelStore = std::map<Name, GoChan>;

using GoLocalStore = std::map<Name, GoValue>;

struct GoRoutine {
  GoStmtPtr stmt;
  GoLocalStore sigma;
};

// Routines form a multiset; the vector order carries no meaning and go_key
// ignores it.
struct GoGlobalConfig {
  std::vector<GoRoutine> routines;
  ChannelStore chans;
};

struct GoFunc {
  std::vector<Name> params;
  GoStmtPtr body;
};
// Function table; immutable over a run. Entry point is "main".
struct GoProgram {
  std::map<Name, GoFunc> funcs;
};

// ---------------------------------------------------------------------------
// Actions

enum class GoActKind : std::uint8_t { Tau, Recv, Send, SendNu, Spawn };

// Spawn only occurs in local steps; the global rules turn it into tau.
// SendNu exports a previously local channel (the exported name is fresh).
struct GoAction {
  GoActKind kind = GoActKind::Tau;
  Name ch;                    // channel, or function name for Spawn
  std::vector<GoValue> vals;  // one value, or Spawn arguments

  bool operator==(const GoAction&) const = default;
  std::string label() const;  // "tau" | "r(ch,v)" | "s(ch,v)" | "s(ch,nu v)" | "g(f,v...)"

  static GoAction mk_tau() { return {}; }
  static GoAction mk_recv(Name ch, GoValue v) { return {GoActKind::Recv, std::move(ch), {std::move(v)}}; }
  static GoAction mk_send(Name ch, GoValue v) { return {GoActKind::Send, std::move(ch), {std::move(v)}}; }
  static GoAction mk_send_nu(Name ch, Name fresh) { return {GoActKind::SendNu, std::move(ch), {std::move(fresh)}}; }
};

// How a global action reads as a buffered-calculus label. Spawn has no image
// (it never reaches the global level).
Action go_action_pib(const GoAction& a);

struct UnknownVar : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct UnsupportedFeature : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Two-level semantics. A stuck term yields the empty list.

struct GoExprStep {
  GoAction act;
  GoExprPtr e2;
  ChannelStore chans2;
};
struct GoLocalStep {
  GoAction act;
  GoStmtPtr s2;
  GoLocalStore sigma2;
  ChannelStore chans2;
};
struct GoGlobalStep {
  GoAction act;
  GoGlobalConfig g2;
};

// pool holds the values a receive on an unbuffered channel may be
// instantiated with. The local store never changes during expression steps.
std::vector<GoExprStep> go_expr_step(const GoExprPtr& e, const GoLocalStore& sigma,
                                     const ChannelStore& chans,
                                     const std::vector<GoValue>& pool = {});
std::vector<GoLocalStep> go_local_step(const GoStmtPtr& s, const GoLocalStore& sigma,
                                       const ChannelStore& chans,
                                       const std::vector<GoValue>& pool = {});

// env lists the ground values the environment may feed in. The instantiation
// pool is env plus the global channels of g plus one fresh representative;
// fresh environment channels are not offered (their capacity is unknowable).
// Results are sorted by (label, target key) and deduplicated.
std::vector<GoGlobalStep> go_global_successors(const GoProgram& prog, const GoGlobalConfig& g,
                                               const NameSet& env = {});

std::string go_print_expr(const GoExprPtr& e);
std::string go_print_stmt(const GoStmtPtr& s);
// Order-independent canonical key of a global configuration.
std::string go_key(const GoGlobalConfig& g);

// Textual front end: a sequence of "func f(x, y) { s }" declarations, one of
// them "main". Statements separate with ';'. Every identifier in expression
// position is a variable.
GoProgram parse_go(const std::string& src);

// Initial configuration: main's body with every variable it mentions bound to
// 0. Each seed (name, capacity, gtag) adds a channel and a main variable of
// the same spelling holding it.
GoGlobalConfig go_initial(const GoProgram& prog,
                          const std::vector<std::tuple<Name, long long, int>>& seeds = {});

struct GoLts {
  Lts lts;
  std::vector<GoGlobalConfig> configs;  // aligned with lts.states
};
// Edge labels are the buffered-calculus reading of the global actions, so the
// result feeds the same bisimulation checkers as encoded systems.
GoLts go_reachable_lts(const GoProgram& prog, const GoGlobalConfig& g,
                       const LtsBounds& bounds = {}, const NameSet& env = {});

// ---------------------------------------------------------------------------
// Encoding

// Variable agent: holds the current value on an internal lock name and serves
// get/put requests arriving on x as (g, p) pairs.
TermPtr go_var_agent(const Name& x, const GoValue& v);
TermPtr encode_go_expr(const GoExprPtr& e, const Name& r);
TermPtr encode_go_stmt(const GoStmtPtr& s, const Name& r);
// Whole-configuration encoding: local channels and function names restricted
// over the routine and function-table processes, buffer store derived from
// the channel store (local entries marked, synchronous channels dropped,
// visibility tags erased).
Config encode_go_global(const GoProgram& prog, const GoGlobalConfig& g);

// ---------------------------------------------------------------------------
// Transition classification for encoded programs

enum class StepClass : std::uint8_t { Simulating, Preparing };

struct NotFromEncoding : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Simulating iff a fired prefix (or buffer-introducing restriction) carries a
// marker; conditional markers count only when the transmitted object is
// "true". Throws NotFromEncoding when the source process carries no markers
// anywhere.
StepClass classify_transition(const Transition& t);

// Configurations reachable through Preparing tau steps (the start included),
// keyed canonically. Throws on blowup past max_states.
std::map<std::string, Config> preparing_closure(const Config& c, const NameSet& env = {},
                                                std::size_t max_states = 4000);

// Drops parallel components that can never fire: guarded components whose
// every guard subject is a restricted name that occurs nowhere else and holds
// no buffer. Encoded programs shed such residue at each variable access.
Config strip_inert(const Config& c);

// Bounded LTS of an encoded configuration with states quotiented by
// strip_inert. Residue neither acts nor synchronizes, so dropping it
// preserves the transitions while collapsing the garbage-inflated state
// space; without the quotient every variable access forks the space.
PibLts encoded_reachable_lts(const Config& c, const LtsBounds& bounds = {},
                             const NameSet& env = {});

}  // namespace pibwb
