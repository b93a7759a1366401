#include "manifest.hpp"

#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>

#include <openssl/evp.h>

#include "ipakit/error.hpp"

namespace ipakit::cli {

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr);
  char buf[1 << 16];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf, static_cast<std::size_t>(in.gcount()));
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), digest, &len);
  std::ostringstream hex;
  for (unsigned i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int{digest[i]};
  return hex.str();
}

void RunManifest::write_next_to(const std::string& output) const {
  const std::string path = output + ".manifest.tsv";
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << "command\t" << command << '\n' << "version\t" << version << '\n' << "seed\t" << seed << '\n';
  for (const auto& [k, v] : flags) out << "flag\t" << k << '\t' << v << '\n';
  for (const auto& [p, d] : inputs) out << "input\t" << p << '\t' << d << '\n';
}

}  // namespace ipakit::cli
