#include "pibwb/print.hpp"

#include <sstream>

namespace pibwb {

std::string print_capacity(const Capacity& c) {
  return c.infinite ? "inf" : std::to_string(c.n);
}

namespace {

std::string mark_str(Mark m) {
  return m == Mark::None ? "" : (m == Mark::Sim ? "*" : "**");
}

std::string prefix_str(const Prefix& p) {
  std::ostringstream o;
  switch (p.kind) {
    case PrefixKind::Input: {
      o << p.subject << '(';
      for (size_t i = 0; i < p.names.size(); ++i) o << (i ? "," : "") << p.names[i];
      o << ')';
      break;
    }
    case PrefixKind::Output: {
      o << p.subject << '<';
      for (size_t i = 0; i < p.names.size(); ++i) o << (i ? "," : "") << p.names[i];
      o << '>';
      break;
    }
    case PrefixKind::Tau:
      o << "tau";
      break;
  }
  o << mark_str(p.mark);
  return o.str();
}

// prec 0: | and + may appear bare; 1: + only; 2: atom position
void pr(std::ostringstream& o, const TermPtr& t, int prec) {
  std::visit(
      [&](auto&& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, ChoiceT>) {
          if (n.branches.empty()) {
            o << '0';
            return;
          }
          bool wrap = n.branches.size() > 1 && prec >= 2;
          if (wrap) o << '(';
          for (size_t i = 0; i < n.branches.size(); ++i) {
            if (i) o << " + ";
            o << prefix_str(n.branches[i].pre) << '.';
            pr(o, n.branches[i].cont, 2);
          }
          if (wrap) o << ')';
        } else if constexpr (std::is_same_v<T, ParT>) {
          bool wrap = prec >= 1;
          if (wrap) o << '(';
          for (size_t i = 0; i < n.parts.size(); ++i) {
            if (i) o << " | ";
            pr(o, n.parts[i], 1);
          }
          if (wrap) o << ')';
        } else if constexpr (std::is_same_v<T, NewT>) {
          bool wrap = prec >= 1;
          if (wrap) o << '(';
          o << "new " << n.name << " in ";
          pr(o, n.body, 0);
          if (wrap) o << ')';
        } else if constexpr (std::is_same_v<T, NewBufT>) {
          bool wrap = prec >= 1;
          if (wrap) o << '(';
          o << "new " << n.name << ':' << print_capacity(n.cap) << mark_str(n.mark) << " in ";
          pr(o, n.body, 0);
          if (wrap) o << ')';
        } else if constexpr (std::is_same_v<T, ReplT>) {
          o << '!';
          pr(o, n.body, 2);
        } else if constexpr (std::is_same_v<T, TestT>) {
          o << '[' << n.lhs << (n.op == TestOp::Eq ? "=" : "<") << n.rhs << "]{";
          pr(o, n.then_b, 0);
          o << "}{";
          pr(o, n.else_b, 0);
          o << '}';
        } else if constexpr (std::is_same_v<T, FAgentT>) {
          o << "F[" << print_capacity(n.cap) << "; ";
          for (size_t i = 0; i < n.queue.size(); ++i)
            o << (i ? "," : "") << '(' << n.queue[i].first << ',' << n.queue[i].second << ')';
          o << "; " << n.in_name << ", " << n.out_name << ']';
        }
      },
      t->v);
}

}  // namespace

std::string print_term(const TermPtr& p) {
  std::ostringstream o;
  pr(o, p, 0);
  return o.str();
}

std::string print_store(const BufferStore& b) {
  std::ostringstream o;
  o << "{ ";
  bool first = true;
  for (auto& [k, buf] : b) {
    if (!first) o << ", ";
    first = false;
    o << k << " -> (" << print_capacity(buf.cap) << ", [";
    for (size_t i = 0; i < buf.queue.size(); ++i) {
      if (i) o << ", ";
      if (buf.queue[i].local)
        o << "(new " << buf.queue[i].name << ")";
      else
        o << buf.queue[i].name;
    }
    o << "])";
  }
  o << " }";
  return o.str();
}

std::string print_config(const Config& c) {
  if (c.store.empty()) return print_term(c.process);
  return print_term(c.process) + " @ " + print_store(c.store);
}

}  // namespace pibwb
