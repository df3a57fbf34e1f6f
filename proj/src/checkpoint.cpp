#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include "dml/errors.hpp"
#include "dml/model.hpp"

namespace dml {

namespace {

constexpr std::string_view kMagic = "dml-checkpoint 1";

static_assert(std::endian::native == std::endian::little,
              "checkpoint values are stored little-endian");

}  // namespace

// Layout:
//   dml-checkpoint 1
//   segments <count>
//   <name> <offset> <rows>x<cols>     (one line per segment)
//   values <count>
//   <count * 8 raw bytes>
void save_checkpoint(const std::filesystem::path& path,
                     const ParamVector& params) {
  if (!params.layout.is_contiguous() || params.layout.total() != params.values.size()) {
    throw CheckpointFormatError("layout does not cover the parameter vector");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << kMagic << '\n';
  out << "segments " << params.layout.segments.size() << '\n';
  for (const Segment& s : params.layout.segments) {
    out << s.name << ' ' << s.offset << ' ' << s.rows << 'x' << s.cols << '\n';
  }
  out << "values " << params.values.size() << '\n';
  out.write(reinterpret_cast<const char*>(params.values.data()),
            static_cast<std::streamsize>(params.values.size() * sizeof(double)));
  if (!out) throw IoError("failed writing " + path.string());
}

ParamVector load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  auto next_line = [&](const char* what) {
    std::string line;
    if (!std::getline(in, line)) {
      throw CheckpointFormatError(std::string("truncated checkpoint, expected ") + what);
    }
    return line;
  };
  if (next_line("magic") != kMagic) {
    throw CheckpointFormatError(path.string() + " is not a dml checkpoint");
  }
  std::size_t count = 0;
  {
    std::istringstream ls(next_line("segment count"));
    std::string tag;
    if (!(ls >> tag >> count) || tag != "segments") {
      throw CheckpointFormatError("bad segment count line");
    }
  }
  ParamVector p;
  for (std::size_t k = 0; k < count; ++k) {
    std::istringstream ls(next_line("segment"));
    Segment s;
    char x = 0;
    if (!(ls >> s.name >> s.offset >> s.rows >> x >> s.cols) || x != 'x') {
      throw CheckpointFormatError("bad segment line " + std::to_string(k));
    }
    p.layout.segments.push_back(std::move(s));
  }
  std::size_t n = 0;
  {
    std::istringstream ls(next_line("value count"));
    std::string tag;
    if (!(ls >> tag >> n) || tag != "values") {
      throw CheckpointFormatError("bad value count line");
    }
  }
  if (!p.layout.is_contiguous() || p.layout.total() != n) {
    throw CheckpointFormatError("segments do not tile the value array");
  }
  p.values.resize(n);
  in.read(reinterpret_cast<char*>(p.values.data()),
          static_cast<std::streamsize>(n * sizeof(double)));
  if (in.gcount() != static_cast<std::streamsize>(n * sizeof(double))) {
    throw CheckpointFormatError("truncated value array");
  }
  return p;
}

}  // namespace dml
