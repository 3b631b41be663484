#ifndef XDRE_ENCODER_WORDPIECE_HPP_
#define XDRE_ENCODER_WORDPIECE_HPP_

// BERT-style tokenization of one pre-split word: punctuation splitting,
// optional lowercasing, then greedy longest-match WordPiece.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace xdre::encoder {

class WordPiece {
 public:
  WordPiece() = default;
  WordPiece(std::vector<std::string> vocab, bool lowercase) : tokens_(std::move(vocab)), lowercase_(lowercase) {
    for (std::size_t i = 0; i < tokens_.size(); ++i) index_.emplace(tokens_[i], static_cast<int>(i));
    for (const char* special : {"[UNK]", "[CLS]", "[SEP]"}) {
      if (!index_.count(special)) throw std::runtime_error(std::string("vocabulary lacks ") + special);
    }
  }

  static WordPiece from_file(const std::filesystem::path& path, bool lowercase) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read vocabulary '" + path.string() + "'");
    std::vector<std::string> vocab;
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      vocab.push_back(line);
    }
    return WordPiece(std::move(vocab), lowercase);
  }

  int id(const std::string& token) const {
    auto it = index_.find(token);
    return it == index_.end() ? unk() : it->second;
  }
  int unk() const { return index_.at("[UNK]"); }
  int cls() const { return index_.at("[CLS]"); }
  int sep() const { return index_.at("[SEP]"); }
  std::size_t size() const { return tokens_.size(); }
  const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }

  /// Subword ids of one word; never empty (falls back to [UNK]).
  std::vector<int> encode_word(const std::string& word) const {
    if (index_.count(word) && word.size() > 2 && word.front() == '[' && word.back() == ']') return {index_.at(word)};
    std::vector<int> out;
    for (const auto& piece : basic_split(word)) {
      const auto sub = wordpiece(piece);
      out.insert(out.end(), sub.begin(), sub.end());
    }
    if (out.empty()) out.push_back(unk());
    return out;
  }

 private:
  static std::vector<std::uint32_t> decode_utf8(const std::string& s) {
    std::vector<std::uint32_t> cps;
    for (std::size_t i = 0; i < s.size();) {
      const auto c = static_cast<unsigned char>(s[i]);
      int len = c < 0x80 ? 1 : (c >> 5) == 0x6 ? 2 : (c >> 4) == 0xe ? 3 : (c >> 3) == 0x1e ? 4 : 1;
      if (i + static_cast<std::size_t>(len) > s.size()) len = 1;
      std::uint32_t cp = len == 1 ? c : len == 2 ? (c & 0x1fu) : len == 3 ? (c & 0x0fu) : (c & 0x07u);
      for (int k = 1; k < len; ++k) cp = (cp << 6) | (static_cast<unsigned char>(s[i + static_cast<std::size_t>(k)]) & 0x3fu);
      cps.push_back(cp);
      i += static_cast<std::size_t>(len);
    }
    return cps;
  }

  static std::string encode_utf8(std::uint32_t cp) {
    std::string out;
    if (cp < 0x80) {
      out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
      out.push_back(static_cast<char>(0xc0 | (cp >> 6)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
    } else if (cp < 0x10000) {
      out.push_back(static_cast<char>(0xe0 | (cp >> 12)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3f)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
    } else {
      out.push_back(static_cast<char>(0xf0 | (cp >> 18)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3f)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3f)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
    }
    return out;
  }

  static bool is_punct(std::uint32_t cp) {
    return (cp >= 33 && cp <= 47) || (cp >= 58 && cp <= 64) || (cp >= 91 && cp <= 96) || (cp >= 123 && cp <= 126) ||
           (cp >= 0x2000 && cp <= 0x206f) || (cp >= 0x3000 && cp <= 0x303f);
  }
  static bool is_cjk(std::uint32_t cp) {
    return (cp >= 0x4e00 && cp <= 0x9fff) || (cp >= 0x3400 && cp <= 0x4dbf) || (cp >= 0x20000 && cp <= 0x2a6df) ||
           (cp >= 0xf900 && cp <= 0xfaff) || (cp >= 0x2f800 && cp <= 0x2fa1f);
  }
  static bool is_space_or_control(std::uint32_t cp) { return cp <= 32 || cp == 0x7f || cp == 0xfffd; }

  std::vector<std::string> basic_split(const std::string& word) const {
    std::vector<std::string> pieces;
    std::string current;
    auto flush = [&] {
      if (!current.empty()) pieces.push_back(std::move(current));
      current.clear();
    };
    for (std::uint32_t cp : decode_utf8(word)) {
      if (is_space_or_control(cp)) {
        flush();
        continue;
      }
      if (lowercase_ && cp >= 'A' && cp <= 'Z') cp += 32;
      if (is_punct(cp) || is_cjk(cp)) {
        flush();
        pieces.push_back(encode_utf8(cp));
        continue;
      }
      current += encode_utf8(cp);
    }
    flush();
    return pieces;
  }

  std::vector<int> wordpiece(const std::string& piece) const {
    if (piece.size() > 100) return {unk()};
    std::vector<int> out;
    std::size_t start = 0;
    while (start < piece.size()) {
      std::size_t end = piece.size();
      int found = -1;
      while (end > start) {
        std::string sub = piece.substr(start, end - start);
        if (start > 0) sub = "##" + sub;
        auto it = index_.find(sub);
        if (it != index_.end()) {
          found = it->second;
          break;
        }
        --end;
        while (end > start && (static_cast<unsigned char>(piece[end]) & 0xc0) == 0x80) --end;  // stay on code point boundaries
      }
      if (found < 0) return {unk()};
      out.push_back(found);
      start = end;
    }
    return out;
  }

  std::vector<std::string> tokens_;
  std::map<std::string, int> index_;
  bool lowercase_ = true;
};

}  // namespace xdre::encoder

#endif  // XDRE_ENCODER_WORDPIECE_HPP_
