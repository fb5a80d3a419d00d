#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lpgen {

enum class Errc {
  UnbalancedBrackets,
  EmptyTree,
  PreterminalWithMultipleChildren,
  NodeNotInTree,
  MalformedGrammarFile,
  MissingAlignments,
  EmptyTreebank,
  AssignmentMismatch,
  SymbolClash,
  EmptyQuestion,
  EdgeNotInLattice,
  ParseFailure,
  EmptyIntersection,
  EmptySentence,
  DegenerateLabels,
  UnboundTarget,
  EmptyGold,
  NoEntityCandidates,
  MalformedInput,
  Io,
};

inline std::string_view errc_name(Errc code) {
  switch (code) {
    case Errc::UnbalancedBrackets: return "UnbalancedBrackets";
    case Errc::EmptyTree: return "EmptyTree";
    case Errc::PreterminalWithMultipleChildren: return "PreterminalWithMultipleChildren";
    case Errc::NodeNotInTree: return "NodeNotInTree";
    case Errc::MalformedGrammarFile: return "MalformedGrammarFile";
    case Errc::MissingAlignments: return "MissingAlignments";
    case Errc::EmptyTreebank: return "EmptyTreebank";
    case Errc::AssignmentMismatch: return "AssignmentMismatch";
    case Errc::SymbolClash: return "SymbolClash";
    case Errc::EmptyQuestion: return "EmptyQuestion";
    case Errc::EdgeNotInLattice: return "EdgeNotInLattice";
    case Errc::ParseFailure: return "ParseFailure";
    case Errc::EmptyIntersection: return "EmptyIntersection";
    case Errc::EmptySentence: return "EmptySentence";
    case Errc::DegenerateLabels: return "DegenerateLabels";
    case Errc::UnboundTarget: return "UnboundTarget";
    case Errc::EmptyGold: return "EmptyGold";
    case Errc::NoEntityCandidates: return "NoEntityCandidates";
    case Errc::MalformedInput: return "MalformedInput";
    case Errc::Io: return "Io";
  }
  return "Unknown";
}

/// All library failures are reported through this exception; `code()`
/// identifies the failure class so callers (the CLI in particular) can map
/// it to an exit status without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace lpgen
