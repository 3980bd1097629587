#include "halpern/core_linalg.hpp"

#include <cstdio>

namespace halpern {

std::string NormKind::name() const {
  switch (tag_) {
    case Tag::L1:
      return "L1";
    case Tag::L2:
      return "L2";
    case Tag::LInf:
      return "Linf";
    case Tag::Lp: {
      char buf[64];
      std::snprintf(buf, sizeof buf, "L%.17g", p_);
      return buf;
    }
  }
  return "?";
}

NormKind NormKind::parse(const std::string& text) {
  if (text == "L1") return l1();
  if (text == "L2") return l2();
  if (text == "Linf" || text == "LInf") return linf();
  if (text.size() > 1 && text[0] == 'L') {
    std::size_t used = 0;
    double p = 0.0;
    try {
      p = std::stod(text.substr(1), &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == text.size() - 1) {
      if (p == 1.0) return l1();
      if (p == 2.0) return l2();
      return lp(p);
    }
  }
  throw DomainError("unknown norm '" + text + "' (expected L1, L2, Linf or L<p>)");
}

double norm_equivalence_mu(const NormKind& kind, int dim) {
  if (dim < 1) throw DomainError("norm_equivalence_mu: dim must be >= 1");
  const double d = static_cast<double>(dim);
  switch (kind.tag()) {
    case NormKind::Tag::L2:
    case NormKind::Tag::LInf:
      return 1.0;
    case NormKind::Tag::L1:
      return std::sqrt(d);
    case NormKind::Tag::Lp: {
      const double p = kind.exponent();
      return p < 2.0 ? std::pow(d, 1.0 / p - 0.5) : 1.0;
    }
  }
  return 1.0;
}

}  // namespace halpern
