#pragma once

#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "reflray/common.hpp"
#include "reflray/vec3.hpp"

// Minimal nested key-value block format:
//
//   # comment
//   key value [value...]
//   block {
//     key value
//   }
//
// Parsing is strict: consumers mark every entry they read, and
// check_consumed() rejects anything left over, so a misspelled key fails
// loudly instead of silently using a default.

namespace reflray {

struct TextNode {
  std::string key;
  std::vector<std::string> values;  // for key-value entries
  std::vector<TextNode> children;   // for blocks
  bool is_block = false;
  int line = 0;
  mutable bool consumed = false;
};

namespace textio {

inline std::vector<std::string> tokenize(const std::string& line) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char ch : line) {
    if (ch == '#') break;
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!cur.empty()) {
        tokens.push_back(cur);
        cur.clear();
      }
    } else {
      cur.push_back(ch);
    }
  }
  if (!cur.empty()) tokens.push_back(cur);
  return tokens;
}

inline TextNode parse(const std::string& text, const std::string& origin) {
  TextNode root;
  root.is_block = true;
  std::vector<TextNode*> stack{&root};
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::vector<std::string> tokens = tokenize(line);
    if (tokens.empty()) continue;
    if (tokens.size() == 1 && tokens[0] == "}") {
      if (stack.size() < 2) {
        throw IoError(origin + ":" + std::to_string(line_no) +
                      ": unmatched '}'");
      }
      stack.pop_back();
      continue;
    }
    if (tokens.back() == "{") {
      if (tokens.size() != 2) {
        throw IoError(origin + ":" + std::to_string(line_no) +
                      ": expected 'name {'");
      }
      TextNode node;
      node.key = tokens[0];
      node.is_block = true;
      node.line = line_no;
      stack.back()->children.push_back(std::move(node));
      stack.push_back(&stack.back()->children.back());
      continue;
    }
    TextNode node;
    node.key = tokens[0];
    node.values.assign(tokens.begin() + 1, tokens.end());
    node.line = line_no;
    stack.back()->children.push_back(std::move(node));
  }
  if (stack.size() != 1) {
    throw IoError(origin + ": unterminated block");
  }
  return root;
}

inline TextNode parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path);
}

inline void serialize_node(const TextNode& node, std::ostream& out,
                           int depth) {
  const std::string indent(static_cast<std::size_t>(depth) * 2, ' ');
  for (const TextNode& child : node.children) {
    if (child.is_block) {
      out << indent << child.key << " {\n";
      serialize_node(child, out, depth + 1);
      out << indent << "}\n";
    } else {
      out << indent << child.key;
      for (const std::string& v : child.values) out << " " << v;
      out << "\n";
    }
  }
}

inline std::string serialize(const TextNode& root) {
  std::ostringstream out;
  serialize_node(root, out, 0);
  return out.str();
}

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace textio

// Strict reader over a parsed block.
class TextCursor {
 public:
  TextCursor(const TextNode* node, std::string origin)
      : node_(node), origin_(std::move(origin)) {
    node_->consumed = true;
  }

  const std::string& origin() const { return origin_; }
  int line() const { return node_->line; }

  bool has(const std::string& key) const {
    for (const TextNode& c : node_->children) {
      if (c.key == key) return true;
    }
    return false;
  }

  TextCursor block(const std::string& key) const {
    const TextNode* found = nullptr;
    for (const TextNode& c : node_->children) {
      if (c.key == key && c.is_block) {
        if (found != nullptr) fail(c.line, "duplicate block '" + key + "'");
        found = &c;
      }
    }
    if (found == nullptr) fail(node_->line, "missing block '" + key + "'");
    return TextCursor(found, origin_);
  }

  std::vector<TextCursor> blocks(const std::string& key) const {
    std::vector<TextCursor> out;
    for (const TextNode& c : node_->children) {
      if (c.key == key && c.is_block) out.emplace_back(&c, origin_);
    }
    return out;
  }

  const TextNode* entry(const std::string& key, bool required) const {
    const TextNode* found = nullptr;
    for (const TextNode& c : node_->children) {
      if (c.key == key && !c.is_block) {
        if (found != nullptr) fail(c.line, "duplicate key '" + key + "'");
        found = &c;
      }
    }
    if (found == nullptr) {
      if (required) fail(node_->line, "missing key '" + key + "'");
      return nullptr;
    }
    found->consumed = true;
    return found;
  }

  std::string get_string(const std::string& key) const {
    const TextNode* e = entry(key, true);
    if (e->values.size() != 1) fail(e->line, "'" + key + "' wants one value");
    return e->values[0];
  }
  std::string get_string(const std::string& key, const std::string& dflt) const {
    const TextNode* e = entry(key, false);
    if (e == nullptr) return dflt;
    if (e->values.size() != 1) fail(e->line, "'" + key + "' wants one value");
    return e->values[0];
  }

  double get_double(const std::string& key) const {
    return parse_double(entry(key, true), key);
  }
  double get_double(const std::string& key, double dflt) const {
    const TextNode* e = entry(key, false);
    return e == nullptr ? dflt : parse_double(e, key);
  }

  int get_int(const std::string& key) const {
    return static_cast<int>(parse_double(entry(key, true), key));
  }
  int get_int(const std::string& key, int dflt) const {
    const TextNode* e = entry(key, false);
    return e == nullptr ? dflt : static_cast<int>(parse_double(e, key));
  }

  bool get_bool(const std::string& key, bool dflt) const {
    const TextNode* e = entry(key, false);
    if (e == nullptr) return dflt;
    if (e->values.size() != 1 ||
        (e->values[0] != "true" && e->values[0] != "false")) {
      fail(e->line, "'" + key + "' wants true or false");
    }
    return e->values[0] == "true";
  }

  Vec3d get_vec3(const std::string& key) const {
    const TextNode* e = entry(key, true);
    if (e->values.size() != 3) fail(e->line, "'" + key + "' wants 3 values");
    return {to_double(e, e->values[0]), to_double(e, e->values[1]),
            to_double(e, e->values[2])};
  }

  std::pair<double, double> get_pair(const std::string& key, double a,
                                     double b) const {
    const TextNode* e = entry(key, false);
    if (e == nullptr) return {a, b};
    if (e->values.size() != 2) fail(e->line, "'" + key + "' wants 2 values");
    return {to_double(e, e->values[0]), to_double(e, e->values[1])};
  }

  // Every entry and block must have been read.
  void check_consumed() const { check_node(*node_); }

  [[noreturn]] void fail(int line, const std::string& msg) const {
    throw IoError(origin_ + ":" + std::to_string(line) + ": " + msg);
  }

 private:
  double parse_double(const TextNode* e, const std::string& key) const {
    if (e->values.size() != 1) fail(e->line, "'" + key + "' wants one value");
    return to_double(e, e->values[0]);
  }

  double to_double(const TextNode* e, const std::string& s) const {
    try {
      std::size_t pos = 0;
      const double v = std::stod(s, &pos);
      if (pos != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      fail(e->line, "not a number: '" + s + "'");
    }
  }

  void check_node(const TextNode& node) const {
    for (const TextNode& c : node.children) {
      if (!c.consumed) {
        fail(c.line, "unknown key '" + c.key + "'");
      }
      if (c.is_block) check_node(c);
    }
  }

  const TextNode* node_;
  std::string origin_;
};

}  // namespace reflray
