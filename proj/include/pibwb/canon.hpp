// Name hygiene, structural congruence, canonical forms.
#pragma once

#include "pibwb/term.hpp"

namespace pibwb {

NameSet free_names(const TermPtr& p);
NameSet local_names(const TermPtr& p);   // nu-bound names only (not input binders)
NameSet all_names(const TermPtr& p);

// Names appearing anywhere in the store: keys, entry names.
NameSet store_names(const BufferStore& b);
// Names of Local entries (ln(B)).
NameSet store_local_names(const BufferStore& b);

// First token not contained in avoid: base, base1, base2, ...
Name fresh_name(const Name& base, const NameSet& avoid);

// Capture-avoiding substitution of `replacement` for free occurrences of
// `target`. Raw version used by the transition engine; the public substitute
// re-canonicalizes (process-level, empty store).
TermPtr subst_raw(const TermPtr& p, const Name& replacement, const Name& target);
TermPtr substitute(const TermPtr& p, const Name& replacement, const Name& target);

// Rewrites buffer entries equal to `target` into `replacement` (this is how
// the transition rules flip locality, B{c/nu c} and B{nu c/c}). Keys are
// untouched.
BufferStore store_substitute(const BufferStore& b, const BufferEntry& replacement,
                             const BufferEntry& target);

// Whole-store rename (keys and entry names), used by internal uniquification.
BufferStore store_rename(const BufferStore& b, const Name& replacement, const Name& target);

struct Canon;  // internal

Config canonicalize(const Config& c);

// Canonical key: deterministic serialization of canonicalize(c). Equal keys
// iff the configs are structurally congruent (replication-free fragment).
std::string canonical_key(const Config& c);

// P ==_B Q. Replication handled by unfolding each !R zero..max_unfold times
// on both sides and intersecting the canonical variants.
bool congruent(const TermPtr& p, const TermPtr& q, const BufferStore& b,
               int max_unfold = 2);

// Every Local entry name is bound by an outermost-extrudable restriction.
bool check_validity(const Config& c);

// The binders a prenex normalization would lift to the outside: plain
// restrictions reachable through Par and New only. Outermost-first.
std::vector<Name> extrudable_binders(const TermPtr& p);

}  // namespace pibwb
