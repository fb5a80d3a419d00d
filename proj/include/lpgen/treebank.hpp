#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "lpgen/error.hpp"
#include "lpgen/util.hpp"

namespace lpgen {

/// A constituency tree as read from a treebank. A preterminal is a node with
/// a non-empty `word` and no children; every other node has children.
struct Tree {
  std::string label;
  std::vector<Tree> children;
  std::string word;

  bool is_preterminal() const { return children.empty(); }
  bool operator==(const Tree&) const = default;
};

namespace detail {

struct BracketLexer {
  std::string_view text;
  std::size_t pos = 0;

  enum class Kind { Open, Close, Atom, End };

  Kind peek(std::string_view* atom = nullptr) {
    while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
    if (pos >= text.size()) return Kind::End;
    if (text[pos] == '(') return Kind::Open;
    if (text[pos] == ')') return Kind::Close;
    std::size_t end = pos;
    while (end < text.size() && !std::isspace(static_cast<unsigned char>(text[end])) &&
           text[end] != '(' && text[end] != ')')
      ++end;
    if (atom) *atom = text.substr(pos, end - pos);
    return Kind::Atom;
  }

  std::string_view take_atom() {
    std::string_view a;
    peek(&a);
    pos += a.size();
    return a;
  }
};

inline Tree parse_node(BracketLexer& lex) {
  using K = BracketLexer::Kind;
  if (lex.peek() != K::Open) throw Error(Errc::UnbalancedBrackets, "expected '('");
  ++lex.pos;
  Tree node;
  K k = lex.peek();
  if (k == K::Close) throw Error(Errc::EmptyTree, "empty bracket pair");
  if (k == K::End) throw Error(Errc::UnbalancedBrackets, "unexpected end of input");
  if (k == K::Atom) node.label = std::string(lex.take_atom());

  std::vector<std::string> words;
  for (;;) {
    k = lex.peek();
    if (k == K::End) throw Error(Errc::UnbalancedBrackets, "missing ')' for " + node.label);
    if (k == K::Close) {
      ++lex.pos;
      break;
    }
    if (k == K::Open) {
      node.children.push_back(parse_node(lex));
    } else {
      words.emplace_back(lex.take_atom());
    }
  }
  if (words.empty() && node.children.empty())
    throw Error(Errc::EmptyTree, "node '" + node.label + "' has no children");
  if (words.size() > 1 || (!words.empty() && !node.children.empty()))
    throw Error(Errc::PreterminalWithMultipleChildren, "preterminal '" + node.label + "'");
  if (!words.empty()) node.word = std::move(words.front());
  return node;
}

inline void render_into(const Tree& t, std::string& out) {
  out += '(';
  out += t.label;
  if (t.is_preterminal()) {
    out += ' ';
    out += t.word;
  } else {
    for (const auto& c : t.children) {
      out += ' ';
      render_into(c, out);
    }
  }
  out += ')';
}

inline void yield_into(const Tree& t, Tokens& out) {
  if (t.is_preterminal()) {
    out.push_back(t.word);
    return;
  }
  for (const auto& c : t.children) yield_into(c, out);
}

}  // namespace detail

/// Parses one PTB-style bracketed tree.
inline Tree parse_tree(std::string_view text) {
  detail::BracketLexer lex{text};
  if (lex.peek() == detail::BracketLexer::Kind::End) throw Error(Errc::EmptyTree, "empty input");
  Tree t = detail::parse_node(lex);
  if (lex.peek() != detail::BracketLexer::Kind::End)
    throw Error(Errc::UnbalancedBrackets, "trailing input after tree");
  return t;
}

inline std::string render(const Tree& t) {
  std::string out;
  detail::render_into(t, out);
  return out;
}

inline Tokens yield(const Tree& t) {
  Tokens out;
  detail::yield_into(t, out);
  return out;
}

/// Proper-noun preterminals mark entity mentions; their tokens keep case.
inline bool is_entity_tag(std::string_view label) { return label == "NNP" || label == "NNPS"; }

inline void lowercase_tokens(Tree& t) {
  if (t.is_preterminal()) {
    if (!is_entity_tag(t.label)) t.word = to_lower(t.word);
    return;
  }
  for (auto& c : t.children) lowercase_tokens(c);
}

/// Reads a treebank file: one tree per line, blank and '#' lines skipped.
/// A root with an empty label wrapping a single tree, "( (S ...))", is unwrapped.
inline std::vector<Tree> read_treebank(const std::filesystem::path& path, bool lowercase = true) {
  std::vector<Tree> trees;
  std::size_t lineno = 0;
  for (const auto& raw : read_lines(path)) {
    ++lineno;
    auto line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    Tree t;
    try {
      t = parse_tree(line);
    } catch (const Error& e) {
      throw Error(e.code(), path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    while (t.label.empty() && t.children.size() == 1) {
      Tree inner = std::move(t.children.front());
      t = std::move(inner);
    }
    if (lowercase) lowercase_tokens(t);
    trees.push_back(std::move(t));
  }
  return trees;
}

// ---------------------------------------------------------------------------
// Binarized trees

using NodeId = std::int32_t;
inline constexpr NodeId kNoNode = -1;

inline constexpr char kIntermediatePrefix = '@';
inline constexpr char kCompositeSep = '+';

inline bool is_intermediate(std::string_view label) {
  return !label.empty() && label.front() == kIntermediatePrefix;
}

struct BinaryNode {
  std::string label;
  NodeId left = kNoNode;
  NodeId right = kNoNode;
  NodeId parent = kNoNode;
  std::string word;  // set iff preterminal
  std::int32_t begin = 0;  // yield span [begin, end)
  std::int32_t end = 0;

  bool is_preterminal() const { return left == kNoNode; }
};

/// Nodes are stored in preorder; the root is node 0.
struct BinaryTree {
  std::vector<BinaryNode> nodes;

  NodeId root() const { return nodes.empty() ? kNoNode : 0; }
  const BinaryNode& operator[](NodeId id) const { return nodes[static_cast<std::size_t>(id)]; }
  std::size_t size() const { return nodes.size(); }
  bool contains(NodeId id) const { return id >= 0 && static_cast<std::size_t>(id) < nodes.size(); }

  Tokens yield() const {
    Tokens out;
    for (const auto& n : nodes)
      if (n.is_preterminal()) out.push_back(n.word);
    return out;
  }

  bool operator==(const BinaryTree&) const = default;
};

namespace detail {

inline void check_label(const std::string& label) {
  if (label.find(kCompositeSep) != std::string::npos || is_intermediate(label))
    throw Error(Errc::MalformedInput, "label '" + label + "' uses a reserved character");
}

// Appends `t` (with unary chains folded into `prefix`) in preorder.
inline NodeId binarize_into(const Tree& t, std::string prefix, NodeId parent, std::int32_t& pos,
                            BinaryTree& out);

inline NodeId binarize_seq(const std::string& label, const std::vector<Tree>& kids, std::size_t from,
                           NodeId parent, std::int32_t& pos, BinaryTree& out) {
  NodeId id = static_cast<NodeId>(out.nodes.size());
  out.nodes.push_back({});
  out.nodes[id].label = label;
  out.nodes[id].parent = parent;
  out.nodes[id].begin = pos;
  NodeId l = binarize_into(kids[from], "", id, pos, out);
  NodeId r;
  if (kids.size() - from == 2) {
    r = binarize_into(kids[from + 1], "", id, pos, out);
  } else {
    std::string inter = label;
    if (!is_intermediate(inter)) inter.insert(inter.begin(), kIntermediatePrefix);
    r = binarize_seq(inter, kids, from + 1, id, pos, out);
  }
  out.nodes[id].left = l;
  out.nodes[id].right = r;
  out.nodes[id].end = pos;
  return id;
}

inline NodeId binarize_into(const Tree& t, std::string prefix, NodeId parent, std::int32_t& pos,
                            BinaryTree& out) {
  check_label(t.label);
  std::string label = prefix.empty() ? t.label : prefix + kCompositeSep + t.label;
  if (t.is_preterminal()) {
    NodeId id = static_cast<NodeId>(out.nodes.size());
    BinaryNode n;
    n.label = std::move(label);
    n.parent = parent;
    n.word = t.word;
    n.begin = pos;
    n.end = ++pos;
    out.nodes.push_back(std::move(n));
    return id;
  }
  if (t.children.size() == 1) return binarize_into(t.children.front(), label, parent, pos, out);
  return binarize_seq(label, t.children, 0, parent, pos, out);
}

inline Tree expand_composite(const std::string& label, Tree inner) {
  auto parts = split(label, kCompositeSep);
  inner.label = parts.back();
  for (std::size_t i = parts.size() - 1; i-- > 0;) {
    Tree wrap;
    wrap.label = parts[i];
    wrap.children.push_back(std::move(inner));
    inner = std::move(wrap);
  }
  return inner;
}

inline void collect_children(const BinaryTree& b, NodeId id, std::vector<Tree>& out);

inline Tree debinarize_node(const BinaryTree& b, NodeId id) {
  const auto& n = b[id];
  Tree t;
  if (n.is_preterminal()) {
    t.word = n.word;
  } else {
    collect_children(b, n.left, t.children);
    collect_children(b, n.right, t.children);
  }
  return expand_composite(n.label, std::move(t));
}

inline void collect_children(const BinaryTree& b, NodeId id, std::vector<Tree>& out) {
  const auto& n = b[id];
  if (is_intermediate(n.label) && !n.is_preterminal()) {
    collect_children(b, n.left, out);
    collect_children(b, n.right, out);
    return;
  }
  out.push_back(debinarize_node(b, id));
}

}  // namespace detail

/// Right-branching binarization. Unary chains fold into composite labels
/// ("X+Y"); a node with children B C D becomes (A B (@A C D)).
inline BinaryTree binarize(const Tree& t) {
  BinaryTree out;
  std::int32_t pos = 0;
  detail::binarize_into(t, "", kNoNode, pos, out);
  return out;
}

inline Tree debinarize(const BinaryTree& b) {
  if (b.nodes.empty()) throw Error(Errc::EmptyTree, "empty binary tree");
  return detail::debinarize_node(b, b.root());
}

/// Bracketed rendering of the binarized shape, labels as stored.
inline std::string render(const BinaryTree& b, NodeId id = 0) {
  const auto& n = b[id];
  if (n.is_preterminal()) return "(" + n.label + " " + n.word + ")";
  return "(" + n.label + " " + render(b, n.left) + " " + render(b, n.right) + ")";
}

/// Inside/outside split of a tree at one node. The outside yield is the
/// full yield with the inside span excised at `begin`.
struct NodeContext {
  NodeId node = kNoNode;
  bool is_root = false;
  std::int32_t begin = 0;
  std::int32_t end = 0;
  Tokens inside_yield;
  Tokens outside_left;
  Tokens outside_right;

  Tokens outside_yield() const {
    Tokens out = outside_left;
    out.insert(out.end(), outside_right.begin(), outside_right.end());
    return out;
  }
};

inline NodeContext decompose(const BinaryTree& t, NodeId node) {
  if (!t.contains(node)) throw Error(Errc::NodeNotInTree, "node " + std::to_string(node));
  const auto& n = t[node];
  Tokens all = t.yield();
  NodeContext ctx;
  ctx.node = node;
  ctx.is_root = n.parent == kNoNode;
  ctx.begin = n.begin;
  ctx.end = n.end;
  ctx.inside_yield.assign(all.begin() + n.begin, all.begin() + n.end);
  ctx.outside_left.assign(all.begin(), all.begin() + n.begin);
  ctx.outside_right.assign(all.begin() + n.end, all.end());
  return ctx;
}

}  // namespace lpgen
