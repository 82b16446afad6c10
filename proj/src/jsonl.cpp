#include "prmkit/jsonl.hpp"

namespace prmkit {

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  if (!in.good() && !in.eof())
    throw std::runtime_error("read failed: " + path.string());
  return std::move(buf).str();
}

void write_text_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for write: " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out.good()) throw std::runtime_error("write failed: " + path.string());
}

std::vector<json> parse_jsonl(const std::string& bytes, const std::string& origin) {
  std::vector<json> out;
  std::size_t pos = 0;
  int line_no = 0;
  while (pos <= bytes.size()) {
    std::size_t nl = bytes.find('\n', pos);
    const std::size_t end = nl == std::string::npos ? bytes.size() : nl;
    ++line_no;
    if (end > pos) {
      const std::string_view line(bytes.data() + pos, end - pos);
      if (line.find_first_not_of(" \t\r") != std::string_view::npos) {
        try {
          out.push_back(json::parse(line));
        } catch (const json::parse_error& e) {
          throw std::runtime_error(origin + ": line " + std::to_string(line_no) +
                                   ": " + e.what());
        }
      }
    }
    if (nl == std::string::npos) break;
    pos = nl + 1;
  }
  return out;
}

}  // namespace prmkit
