#include "ablab/ground_truth.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace ablab {

namespace {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Mat as_matrix(const std::vector<double>& v, std::size_t rows, std::size_t cols) {
    return Eigen::Map<const Mat>(v.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

std::vector<double> to_vec(const Mat& m) { return std::vector<double>(m.data(), m.data() + m.size()); }

struct ObjectPart {
    std::vector<double> mean;
    double sigma;
};

// A prompt broken down into the independent choices the sampler makes.
struct Resolved {
    std::vector<ObjectPart> objects;               // uniform mixture
    std::vector<std::vector<double>> styles;       // uniform mixture; empty = identity
    std::vector<std::vector<double>> glyphs;       // uniform mixture; empty = noise
    std::vector<std::vector<double>> memorized;    // uniform mixture; non-empty overrides everything
};

Resolved resolve(const Vocabulary& vocab, const Prompt& prompt) {
    validate_prompt(vocab, prompt);
    Resolved r;
    const auto take = [&](const ConceptToken& t) {
        switch (t.kind) {
            case TokenKind::Object: r.objects.push_back({t.mean, t.sigma}); break;
            case TokenKind::Style: r.styles.push_back(t.matrix); break;
            case TokenKind::Trademark: r.glyphs.push_back(t.glyph); break;
            case TokenKind::Memorized: r.memorized.push_back(t.point); break;
            default: throw std::logic_error("unexpected token kind in payload");
        }
    };
    for (auto id : prompt.tokens) {
        const ConceptToken& t = vocab.referent(id);
        if (t.kind == TokenKind::Generic) {
            for (auto m : t.members) take(vocab.referent(m));
        } else {
            take(t);
        }
    }
    const auto& s = vocab.settings();
    if (r.objects.empty()) r.objects.push_back({s.background_mean, s.background_sigma});
    return r;
}

}  // namespace

ConceptDistribution::ConceptDistribution(std::vector<GaussianComponent> components)
    : components_(std::move(components)) {
    if (components_.empty()) throw std::invalid_argument("concept distribution needs at least one component");
    dim_ = components_.front().mean.size();
    double wsum = 0.0;
    for (const auto& c : components_) {
        if (c.mean.size() != dim_ || c.cov.size() != dim_ * dim_ || !(c.weight > 0))
            throw std::invalid_argument("concept distribution component is malformed");
        wsum += c.weight;
    }
    for (const auto& c : components_) {
        Eigen::LLT<Mat> llt(as_matrix(c.cov, dim_, dim_));
        if (llt.info() != Eigen::Success)
            throw std::invalid_argument("concept density undefined: covariance is not positive definite");
        Mat l = llt.matrixL();
        double logdet = 0.0;
        for (std::size_t i = 0; i < dim_; ++i) logdet += 2.0 * std::log(l(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)));
        Factor f;
        f.chol = to_vec(l);
        f.log_norm = std::log(c.weight / wsum) - 0.5 * (static_cast<double>(dim_) * std::log(2.0 * std::numbers::pi) + logdet);
        factors_.push_back(std::move(f));
    }
}

double ConceptDistribution::log_density(std::span<const double> x) const {
    if (x.size() != dim_) throw std::invalid_argument("log_density: dimension mismatch");
    std::vector<double> terms(components_.size());
    std::vector<double> z(dim_);
    for (std::size_t k = 0; k < components_.size(); ++k) {
        const auto& mu = components_[k].mean;
        const auto& l = factors_[k].chol;
        // Forward substitution L z = x − μ.
        double q = 0.0;
        for (std::size_t i = 0; i < dim_; ++i) {
            double s = x[i] - mu[i];
            for (std::size_t j = 0; j < i; ++j) s -= l[i * dim_ + j] * z[j];
            z[i] = s / l[i * dim_ + i];
            q += z[i] * z[i];
        }
        terms[k] = factors_[k].log_norm - 0.5 * q;
    }
    const double mx = *std::max_element(terms.begin(), terms.end());
    double s = 0.0;
    for (double t : terms) s += std::exp(t - mx);
    return mx + std::log(s);
}

ConceptDistribution ConceptDistribution::marginal(std::size_t offset, std::size_t len) const {
    if (len == 0 || offset + len > dim_) throw std::invalid_argument("marginal: coordinate range out of bounds");
    std::vector<GaussianComponent> out;
    for (const auto& c : components_) {
        GaussianComponent m;
        m.weight = c.weight;
        m.mean.assign(c.mean.begin() + static_cast<std::ptrdiff_t>(offset),
                      c.mean.begin() + static_cast<std::ptrdiff_t>(offset + len));
        m.cov.resize(len * len);
        for (std::size_t i = 0; i < len; ++i)
            for (std::size_t j = 0; j < len; ++j) m.cov[i * len + j] = c.cov[(offset + i) * dim_ + offset + j];
        out.push_back(std::move(m));
    }
    return ConceptDistribution(std::move(out));
}

std::vector<double> ConceptDistribution::mean() const {
    double wsum = 0.0;
    for (const auto& c : components_) wsum += c.weight;
    std::vector<double> m(dim_, 0.0);
    for (const auto& c : components_)
        for (std::size_t i = 0; i < dim_; ++i) m[i] += c.weight / wsum * c.mean[i];
    return m;
}

std::vector<double> ConceptDistribution::covariance() const {
    double wsum = 0.0;
    for (const auto& c : components_) wsum += c.weight;
    const auto mu = mean();
    std::vector<double> cov(dim_ * dim_, 0.0);
    for (const auto& c : components_) {
        const double w = c.weight / wsum;
        for (std::size_t i = 0; i < dim_; ++i)
            for (std::size_t j = 0; j < dim_; ++j)
                cov[i * dim_ + j] += w * (c.cov[i * dim_ + j] + (c.mean[i] - mu[i]) * (c.mean[j] - mu[j]));
    }
    return cov;
}

ConceptDistribution ground_truth_distribution(const Vocabulary& vocab, const Prompt& prompt) {
    const Resolved r = resolve(vocab, prompt);
    const auto& s = vocab.settings();
    const std::size_t dobj = s.object_dim, dtm = s.trademark_dim, d = dobj + dtm;
    std::vector<GaussianComponent> comps;

    if (!r.memorized.empty()) {
        const double var = s.memorized_sigma * s.memorized_sigma;
        for (const auto& p : r.memorized) {
            GaussianComponent c{1.0, p, std::vector<double>(d * d, 0.0)};
            for (std::size_t i = 0; i < d; ++i) c.cov[i * d + i] = var;
            comps.push_back(std::move(c));
        }
        return ConceptDistribution(std::move(comps));
    }

    std::vector<Mat> styles;
    if (r.styles.empty()) styles.push_back(Mat::Identity(static_cast<Eigen::Index>(dobj), static_cast<Eigen::Index>(dobj)));
    for (const auto& a : r.styles) styles.push_back(as_matrix(a, dobj, dobj));

    // Trademark part: glyph components, or a single zero-mean noise component.
    std::vector<std::pair<std::vector<double>, double>> tm;
    if (r.glyphs.empty()) {
        tm.emplace_back(std::vector<double>(dtm, 0.0), s.trademark_noise * s.trademark_noise);
    } else {
        for (const auto& g : r.glyphs) tm.emplace_back(g, s.glyph_sigma * s.glyph_sigma);
    }

    for (const auto& obj : r.objects) {
        const Eigen::Map<const Eigen::VectorXd> mu(obj.mean.data(), static_cast<Eigen::Index>(dobj));
        for (const auto& a : styles) {
            const Eigen::VectorXd m = a * mu;
            const Mat cov_obj = obj.sigma * obj.sigma * a * a.transpose();
            for (const auto& [g, gvar] : tm) {
                GaussianComponent c;
                c.mean.resize(d);
                c.cov.assign(d * d, 0.0);
                for (std::size_t i = 0; i < dobj; ++i) {
                    c.mean[i] = m(static_cast<Eigen::Index>(i));
                    for (std::size_t j = 0; j < dobj; ++j)
                        c.cov[i * d + j] = cov_obj(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
                }
                for (std::size_t i = 0; i < dtm; ++i) {
                    c.mean[dobj + i] = g[i];
                    c.cov[(dobj + i) * d + dobj + i] = gvar;
                }
                comps.push_back(std::move(c));
            }
        }
    }
    return ConceptDistribution(std::move(comps));
}

Tensor sample_ground_truth(const Vocabulary& vocab, const Prompt& prompt, std::size_t n, Rng& rng) {
    const Resolved r = resolve(vocab, prompt);
    const auto& s = vocab.settings();
    const std::size_t dobj = s.object_dim, dtm = s.trademark_dim, d = dobj + dtm;
    if (n == 0) throw std::invalid_argument("sample_ground_truth: n must be positive");
    Tensor out({n, d});
    std::vector<double> base(dobj);
    for (std::size_t i = 0; i < n; ++i) {
        auto row = out.row(i);
        if (!r.memorized.empty()) {
            const auto& p = r.memorized[uniform_index(rng, r.memorized.size())];
            for (std::size_t j = 0; j < d; ++j) row[j] = p[j] + s.memorized_sigma * standard_normal(rng);
            continue;
        }
        const auto& obj = r.objects[uniform_index(rng, r.objects.size())];
        for (std::size_t j = 0; j < dobj; ++j) base[j] = obj.mean[j] + obj.sigma * standard_normal(rng);
        if (r.styles.empty()) {
            std::copy(base.begin(), base.end(), row.begin());
        } else {
            const auto& a = r.styles[uniform_index(rng, r.styles.size())];
            for (std::size_t j = 0; j < dobj; ++j) {
                double v = 0.0;
                for (std::size_t k = 0; k < dobj; ++k) v += a[j * dobj + k] * base[k];
                row[j] = v;
            }
        }
        if (r.glyphs.empty()) {
            for (std::size_t j = 0; j < dtm; ++j) row[dobj + j] = s.trademark_noise * standard_normal(rng);
        } else {
            const auto& g = r.glyphs[uniform_index(rng, r.glyphs.size())];
            for (std::size_t j = 0; j < dtm; ++j) row[dobj + j] = g[j] + s.glyph_sigma * standard_normal(rng);
        }
    }
    return out;
}

std::vector<double> concept_posterior(std::span<const double> x, std::span<const ConceptDistribution> candidates) {
    if (candidates.size() < 2) throw std::invalid_argument("concept_posterior: need at least two candidates");
    std::vector<double> lp(candidates.size());
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        lp[i] = candidates[i].log_density(x);
        if (std::isnan(lp[i])) throw std::invalid_argument("concept_posterior: candidate density undefined at x");
    }
    const double mx = *std::max_element(lp.begin(), lp.end());
    double s = 0.0;
    for (auto& v : lp) {
        v = std::exp(v - mx);
        s += v;
    }
    for (auto& v : lp) v /= s;
    return lp;
}

}  // namespace ablab
