#include "etkpf/archive.hpp"

#include <cstdint>
#include <fstream>
#include <sstream>

namespace etkpf {

void BlockFile::add_meta(const std::string& key, const std::string& value) {
  meta.emplace_back(key, value);
}

void BlockFile::add_meta(const std::string& key, std::uint64_t value) {
  meta.emplace_back(key, std::to_string(value));
}

void BlockFile::add_block(const std::string& name, Matrix m) {
  blocks.emplace_back(name, std::move(m));
}

bool BlockFile::has_meta(const std::string& key) const {
  for (const auto& [k, v] : meta)
    if (k == key) return true;
  return false;
}

const std::string& BlockFile::meta_at(const std::string& key) const {
  for (const auto& [k, v] : meta)
    if (k == key) return v;
  throw Error("[archive] missing meta key '" + key + "'");
}

bool BlockFile::has_block(const std::string& name) const {
  for (const auto& [k, v] : blocks)
    if (k == name) return true;
  return false;
}

const Matrix& BlockFile::block_at(const std::string& name) const {
  for (const auto& [k, v] : blocks)
    if (k == name) return v;
  throw Error("[archive] missing block '" + name + "'");
}

void write_block_file(const std::string& path, const BlockFile& file) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("[archive] cannot open '" + path + "' for writing");

  out << "etkpf-archive v1\n";
  for (const auto& [k, v] : file.meta) out << "meta " << k << " " << v << "\n";
  for (const auto& [name, m] : file.blocks)
    out << "block " << name << " " << m.rows() << " " << m.cols() << "\n";
  out << "end\n";

  for (const auto& [name, m] : file.blocks) {
    // Row-major payload regardless of Eigen's internal layout.
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) {
        const double v = m(i, j);
        out.write(reinterpret_cast<const char*>(&v), sizeof(double));
      }
  }
  if (!out) throw Error("[archive] write to '" + path + "' failed");
}

BlockFile read_block_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("[archive] cannot open '" + path + "'");

  std::string line;
  if (!std::getline(in, line) || line != "etkpf-archive v1")
    throw Error("[archive] '" + path + "': bad magic line");

  BlockFile file;
  std::vector<std::pair<std::string, std::pair<Eigen::Index, Eigen::Index>>> dims;
  while (std::getline(in, line)) {
    if (line == "end") break;
    std::istringstream is(line);
    std::string tag;
    is >> tag;
    if (tag == "meta") {
      std::string key, value;
      is >> key;
      std::getline(is, value);
      if (!value.empty() && value.front() == ' ') value.erase(0, 1);
      file.meta.emplace_back(key, value);
    } else if (tag == "block") {
      std::string name;
      Eigen::Index rows = 0, cols = 0;
      is >> name >> rows >> cols;
      if (!is || rows < 0 || cols < 0)
        throw Error("[archive] '" + path + "': bad block line: " + line);
      dims.emplace_back(name, std::make_pair(rows, cols));
    } else {
      throw Error("[archive] '" + path + "': unknown header tag: " + line);
    }
  }

  for (const auto& [name, rc] : dims) {
    Matrix m(rc.first, rc.second);
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) {
        double v = 0;
        in.read(reinterpret_cast<char*>(&v), sizeof(double));
        m(i, j) = v;
      }
    if (!in) throw Error("[archive] '" + path + "': truncated payload in block " + name);
    file.blocks.emplace_back(name, std::move(m));
  }
  return file;
}

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << h;
  return os.str();
}

}  // namespace etkpf
