#pragma once

// Uniform handle over the trained batch and fusion detectors, and a
// line-oriented text format for saving and reloading them.
//
// Format (version 1):
//   fdia-model 1
//   kind <perceptron|knn|svm|slr|s3vm|adaboost|mkl>
//   <key> <value...>          one record per line, vectors prefixed by length
//   end
// Reals are written with 17 significant digits, so reloading is exact.

#include <Eigen/Dense>

#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "fdia/errors.hpp"
#include "fdia/learners/adaboost.hpp"
#include "fdia/learners/knn.hpp"
#include "fdia/learners/mkl.hpp"
#include "fdia/learners/perceptron.hpp"
#include "fdia/learners/s3vm.hpp"
#include "fdia/learners/slr.hpp"
#include "fdia/learners/svm.hpp"

namespace fdia {

using DetectorModel = std::variant<PerceptronModel, KnnModel, SvmModel, SlrModel, S3vmModel, AdaboostModel, MklModel>;

inline int predict(const DetectorModel& model, const Eigen::VectorXd& sample) {
  return std::visit([&](const auto& m) { return m.predict(sample); }, model);
}

inline std::vector<int> predict_all(const DetectorModel& model, const std::vector<Eigen::VectorXd>& samples) {
  std::vector<int> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(predict(model, s));
  return out;
}

inline std::string model_kind(const DetectorModel& model) {
  static const char* names[] = {"perceptron", "knn", "svm", "slr", "s3vm", "adaboost", "mkl"};
  return names[model.index()];
}

inline constexpr int kModelFormatVersion = 1;

namespace detail {

class RecordWriter {
 public:
  explicit RecordWriter(std::ostream& os) : os_(os) {}

  void scalar(const char* key, double v) { os_ << key << ' ' << num(v) << '\n'; }
  void integer(const char* key, long long v) { os_ << key << ' ' << v << '\n'; }
  void word(const char* key, const std::string& v) { os_ << key << ' ' << v << '\n'; }
  void vector(const char* key, const Eigen::VectorXd& v) {
    os_ << key << ' ' << v.size();
    for (Eigen::Index i = 0; i < v.size(); ++i) os_ << ' ' << num(v(i));
    os_ << '\n';
  }
  void vector(const char* key, const std::vector<double>& v) {
    vector(key, Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
  }
  void ints(const char* key, const std::vector<int>& v) {
    os_ << key << ' ' << v.size();
    for (int x : v) os_ << ' ' << x;
    os_ << '\n';
  }
  void kernel(const char* key, const KernelDescriptor& k) {
    os_ << key << ' ' << (k.kind == KernelKind::linear ? "linear" : "gaussian") << ' ' << num(k.sigma) << '\n';
  }

  static std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
  }

 private:
  std::ostream& os_;
};

class RecordReader {
 public:
  explicit RecordReader(std::istream& is) : is_(is) {}

  // Next record; the key must match.
  std::istringstream& expect(const std::string& key) {
    std::string line;
    while (std::getline(is_, line)) {
      ++line_no_;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      current_.clear();
      current_.str(line);
      std::string k;
      current_ >> k;
      if (k != key) fail("expected '" + key + "', found '" + k + "'");
      return current_;
    }
    fail("unexpected end of input, expected '" + key + "'");
  }

  double scalar(const std::string& key) { return read_double(expect(key)); }
  long long integer(const std::string& key) {
    long long v = 0;
    if (!(expect(key) >> v)) fail("bad integer for '" + key + "'");
    return v;
  }
  std::string word(const std::string& key) {
    std::string v;
    if (!(expect(key) >> v)) fail("missing value for '" + key + "'");
    return v;
  }
  Eigen::VectorXd vector(const std::string& key) {
    auto& in = expect(key);
    const auto n = read_size(in);
    Eigen::VectorXd v(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) v(static_cast<Eigen::Index>(i)) = read_double(in);
    return v;
  }
  std::vector<double> std_vector(const std::string& key) {
    const auto v = vector(key);
    return {v.data(), v.data() + v.size()};
  }
  std::vector<int> ints(const std::string& key) {
    auto& in = expect(key);
    const auto n = read_size(in);
    std::vector<int> v(n);
    for (auto& x : v) {
      if (!(in >> x)) fail("bad integer list for '" + key + "'");
    }
    return v;
  }
  KernelDescriptor kernel(const std::string& key) {
    auto& in = expect(key);
    std::string kind;
    in >> kind;
    const double sigma = read_double(in);
    if (kind == "linear") return KernelDescriptor{KernelKind::linear, sigma};
    if (kind == "gaussian") {
      if (!(sigma > 0.0)) fail("gaussian kernel width must be positive");
      return KernelDescriptor{KernelKind::gaussian, sigma};
    }
    fail("unknown kernel kind '" + kind + "'");
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError(line_no_, "model: " + msg);
  }

 private:
  double read_double(std::istringstream& in) {
    std::string tok;
    if (!(in >> tok)) fail("missing number");
    try {
      std::size_t used = 0;
      const double v = std::stod(tok, &used);
      if (used != tok.size()) fail("bad number '" + tok + "'");
      return v;
    } catch (const std::invalid_argument&) {
      fail("bad number '" + tok + "'");
    } catch (const std::out_of_range&) {
      fail("number out of range '" + tok + "'");
    }
  }
  std::size_t read_size(std::istringstream& in) {
    long long n = -1;
    if (!(in >> n) || n < 0) fail("bad length");
    return static_cast<std::size_t>(n);
  }

  std::istream& is_;
  std::istringstream current_;
  std::size_t line_no_ = 0;
};

}  // namespace detail

inline void save_model(std::ostream& os, const DetectorModel& model) {
  detail::RecordWriter out(os);
  os << "fdia-model " << kModelFormatVersion << '\n';
  out.word("kind", model_kind(model));
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, PerceptronModel>) {
          out.vector("w", m.w);
          out.scalar("b", m.b);
          out.scalar("gamma", m.gamma);
          out.integer("epochs", m.epochs);
        } else if constexpr (std::is_same_v<T, KnnModel>) {
          out.integer("k", m.k);
          out.integer("count", static_cast<long long>(m.samples.size()));
          for (std::size_t i = 0; i < m.samples.size(); ++i) {
            out.integer("label", m.labels[i]);
            out.vector("x", m.samples[i]);
          }
        } else if constexpr (std::is_same_v<T, SvmModel>) {
          out.kernel("kernel", m.kernel);
          out.scalar("C", m.C);
          out.scalar("bias", m.bias);
          out.integer("dimension", m.dimension);
          out.integer("count", static_cast<long long>(m.beta.size()));
          for (std::size_t i = 0; i < m.beta.size(); ++i) {
            out.integer("index", static_cast<long long>(m.support_indices[i]));
            out.integer("label", m.support_labels[i]);
            out.scalar("beta", m.beta[i]);
            out.vector("x", m.support_vectors[i]);
          }
        } else if constexpr (std::is_same_v<T, SlrModel>) {
          out.vector("w", m.w);
          out.scalar("b", m.b);
          out.scalar("lambda", m.lambda);
        } else if constexpr (std::is_same_v<T, S3vmModel>) {
          out.vector("w", m.w);
          out.scalar("b", m.b);
          out.scalar("C1", m.C1);
          out.scalar("C2", m.C2);
        } else if constexpr (std::is_same_v<T, AdaboostModel>) {
          out.integer("dimension", m.dimension);
          out.integer("rounds", static_cast<long long>(m.stumps.size()));
          for (std::size_t t = 0; t < m.stumps.size(); ++t) {
            out.integer("feature", m.stumps[t].feature_index);
            out.scalar("threshold", m.stumps[t].threshold);
            out.integer("polarity", m.stumps[t].polarity);
            out.scalar("alpha", m.alphas[t]);
          }
        } else {
          out.integer("kernels", static_cast<long long>(m.kernels.size()));
          for (const auto& k : m.kernels) out.kernel("kernel", k);
          out.vector("weights", m.weights);
          out.scalar("C", m.C);
          out.scalar("bias", m.bias);
          out.integer("dimension", m.dimension);
          out.integer("count", static_cast<long long>(m.beta.size()));
          for (std::size_t i = 0; i < m.beta.size(); ++i) {
            out.integer("label", m.support_labels[i]);
            out.scalar("beta", m.beta[i]);
            out.vector("x", m.support_vectors[i]);
          }
        }
      },
      model);
  os << "end\n";
}

inline DetectorModel load_model(std::istream& is) {
  detail::RecordReader in(is);
  const auto version = in.integer("fdia-model");
  if (version != kModelFormatVersion) in.fail("unsupported format version " + std::to_string(version));
  const auto kind = in.word("kind");
  auto count = [&](const char* key) {
    const auto n = in.integer(key);
    if (n < 0) in.fail(std::string("negative ") + key);
    return static_cast<std::size_t>(n);
  };
  auto label = [&] {
    const auto y = in.integer("label");
    if (y != kAttacked && y != kSecure) in.fail("label must be +1 or -1");
    return static_cast<int>(y);
  };

  DetectorModel result;
  if (kind == "perceptron") {
    PerceptronModel m;
    m.w = in.vector("w");
    m.b = in.scalar("b");
    m.gamma = in.scalar("gamma");
    m.epochs = static_cast<int>(in.integer("epochs"));
    result = std::move(m);
  } else if (kind == "knn") {
    KnnModel m;
    m.k = static_cast<int>(in.integer("k"));
    const auto n = count("count");
    for (std::size_t i = 0; i < n; ++i) {
      m.labels.push_back(label());
      m.samples.push_back(in.vector("x"));
    }
    if (m.k < 1 || static_cast<std::size_t>(m.k) > n) in.fail("k out of range");
    result = std::move(m);
  } else if (kind == "svm") {
    SvmModel m;
    m.kernel = in.kernel("kernel");
    m.C = in.scalar("C");
    m.bias = in.scalar("bias");
    m.dimension = in.integer("dimension");
    const auto n = count("count");
    for (std::size_t i = 0; i < n; ++i) {
      m.support_indices.push_back(static_cast<std::size_t>(in.integer("index")));
      m.support_labels.push_back(label());
      m.beta.push_back(in.scalar("beta"));
      m.support_vectors.push_back(in.vector("x"));
    }
    result = std::move(m);
  } else if (kind == "slr") {
    SlrModel m;
    m.w = in.vector("w");
    m.b = in.scalar("b");
    m.lambda = in.scalar("lambda");
    if (m.lambda < 0.0) in.fail("lambda must be nonnegative");
    m.converged = true;
    result = std::move(m);
  } else if (kind == "s3vm") {
    S3vmModel m;
    m.w = in.vector("w");
    m.b = in.scalar("b");
    m.C1 = in.scalar("C1");
    m.C2 = in.scalar("C2");
    result = std::move(m);
  } else if (kind == "adaboost") {
    AdaboostModel m;
    m.dimension = in.integer("dimension");
    const auto n = count("rounds");
    for (std::size_t t = 0; t < n; ++t) {
      StumpModel s;
      s.feature_index = in.integer("feature");
      s.threshold = in.scalar("threshold");
      s.polarity = static_cast<int>(in.integer("polarity"));
      if (s.feature_index < 0 || s.feature_index >= m.dimension) in.fail("stump feature out of range");
      m.stumps.push_back(s);
      m.alphas.push_back(in.scalar("alpha"));
    }
    result = std::move(m);
  } else if (kind == "mkl") {
    MklModel m;
    const auto u = count("kernels");
    for (std::size_t i = 0; i < u; ++i) m.kernels.push_back(in.kernel("kernel"));
    m.weights = in.vector("weights");
    if (static_cast<std::size_t>(m.weights.size()) != u) in.fail("kernel weight count mismatch");
    m.C = in.scalar("C");
    m.bias = in.scalar("bias");
    m.dimension = in.integer("dimension");
    const auto n = count("count");
    for (std::size_t i = 0; i < n; ++i) {
      m.support_labels.push_back(label());
      m.beta.push_back(in.scalar("beta"));
      m.support_vectors.push_back(in.vector("x"));
    }
    result = std::move(m);
  } else {
    in.fail("unknown model kind '" + kind + "'");
  }
  in.expect("end");
  return result;
}

}  // namespace fdia
