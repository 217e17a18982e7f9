#include "malss/models.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

namespace malss {

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::kId: return "id";
    case ModelKind::kLgp: return "lgp";
    case ModelKind::kMlOriginal: return "ml-original";
  }
  throw std::logic_error("to_string: bad ModelKind");
}

ModelKind model_kind_from_string(const std::string& name) {
  if (name == "id") return ModelKind::kId;
  if (name == "lgp") return ModelKind::kLgp;
  if (name == "ml-original") return ModelKind::kMlOriginal;
  throw std::runtime_error("unknown model kind: '" + name +
                           "' (expected id, lgp or ml-original)");
}

namespace {

void check_shapes(const Vector& weights, const std::vector<AnnotatorParams>& annotators,
                  const Matrix& x, const LabelMatrix& labels) {
  if (weights.size() != x.cols()) {
    throw std::invalid_argument("model: classifier weight size != feature count");
  }
  if (labels.num_points() != static_cast<int>(x.rows())) {
    throw std::invalid_argument("model: label matrix rows != feature rows");
  }
  for (const auto& a : annotators) {
    if (a.w.size() != x.cols()) {
      throw std::invalid_argument("model: annotator weight size != feature count");
    }
  }
}

}  // namespace

Posterior e_step(const Vector& weights, double bias,
                 const std::vector<AnnotatorParams>& annotators, const Matrix& x,
                 const LabelMatrix& labels, double sigma_min) {
  check_shapes(weights, annotators, x, labels);
  const int n = static_cast<int>(x.rows());
  Posterior post;
  post.p1.resize(n);
  for (int i = 0; i < n; ++i) {
    const double u = weights.dot(x.row(i)) + bias;
    const auto& obs = labels.labels_of(i);
    if (obs.empty()) {
      post.p1[i] = logistic(u);
      continue;
    }
    const auto [log_q, log_1mq] = log_logistic_pair(u);
    double s1 = log_q, s0 = log_1mq;
    for (const Observation& o : obs) {
      const AnnotatorParams& a = annotators.at(o.annotator);
      const double s = std::max(logistic(a.w.dot(x.row(i)) + a.gamma), sigma_min);
      s1 += label_loglik(o.label, 1, s);
      s0 += label_loglik(o.label, 0, s);
    }
    post.p1[i] = logistic(s1 - s0);
  }
  return post;
}

Posterior e_step_id(const IdParams& params,
                    const std::vector<AnnotatorParams>& annotators, const Matrix& x,
                    const LabelMatrix& labels, double sigma_min) {
  return e_step(params.alpha, params.beta, annotators, x, labels, sigma_min);
}

Posterior e_step_lgp(const LgpParams& params,
                     const std::vector<AnnotatorParams>& annotators, const Matrix& x,
                     const LabelMatrix& labels, double sigma_min) {
  return e_step(params.xi, params.xi0, annotators, x, labels, sigma_min);
}

namespace {

// Shared body of both M-step objectives: expected complete-data
// log-likelihood over labeled points under `post`, minus an optional ridge
// on annotator parameters. Classifier prior q_i = logistic(weights'x_i + bias).
double surrogate_core(const Vector& weights, double bias,
                      const std::vector<AnnotatorParams>& annotators,
                      const Matrix& x, const LabelMatrix& labels,
                      const Posterior& post, double sigma_min,
                      double annotator_ridge, MStepGradients* grads) {
  check_shapes(weights, annotators, x, labels);
  const int n = static_cast<int>(x.rows());
  const int t_count = static_cast<int>(annotators.size());
  if (post.p1.size() != n) {
    throw std::invalid_argument("m_step: posterior length != point count");
  }
  if (grads) {
    grads->classifier = Vector::Zero(weights.size());
    grads->bias = 0.0;
    grads->w.assign(t_count, Vector::Zero(weights.size()));
    grads->gamma.assign(t_count, 0.0);
  }
  double value = 0.0;
  for (int i = 0; i < n; ++i) {
    const auto& obs = labels.labels_of(i);
    if (obs.empty()) continue;  // unlabeled points carry no surrogate terms
    const double p1 = post.p1[i];
    const double u = weights.dot(x.row(i)) + bias;
    const auto [log_q, log_1mq] = log_logistic_pair(u);
    value += p1 * log_q + (1.0 - p1) * log_1mq;
    if (grads) {
      const double c = p1 - logistic(u);
      grads->classifier += c * x.row(i).transpose();
      grads->bias += c;
    }
    for (const Observation& o : obs) {
      const AnnotatorParams& a = annotators[o.annotator];
      const double ua = a.w.dot(x.row(i)) + a.gamma;
      const NoiseTerm term = expected_label_term(ua, o.label, p1, sigma_min);
      value += term.value;
      if (grads) {
        grads->w[o.annotator] += term.factor * x.row(i).transpose();
        grads->gamma[o.annotator] += term.factor;
      }
    }
  }
  if (annotator_ridge > 0.0) {
    for (int t = 0; t < t_count; ++t) {
      value -= annotator_ridge *
               (annotators[t].w.squaredNorm() + annotators[t].gamma * annotators[t].gamma);
      if (grads) {
        grads->w[t] -= 2.0 * annotator_ridge * annotators[t].w;
        grads->gamma[t] -= 2.0 * annotator_ridge * annotators[t].gamma;
      }
    }
  }
  return value;
}

}  // namespace

double m_step_objective_id(const IdParams& params,
                           const std::vector<AnnotatorParams>& annotators,
                           const Matrix& x, const LabelMatrix& labels,
                           const Posterior& post, MStepGradients* grads,
                           double sigma_min, double annotator_ridge) {
  return surrogate_core(params.alpha, params.beta, annotators, x, labels, post,
                        sigma_min, annotator_ridge, grads);
}

double m_step_objective_lgp(const LgpParams& params,
                            const std::vector<AnnotatorParams>& annotators,
                            const Matrix& x, const LabelMatrix& labels,
                            const GraphPrior& graph, const Posterior& post,
                            MStepGradients* grads, double sigma_min,
                            double annotator_ridge) {
  if (graph.prior_matrix.rows() != x.cols() || graph.prior_matrix.cols() != x.cols()) {
    throw std::invalid_argument("m_step_objective_lgp: prior matrix size != feature count");
  }
  double value = surrogate_core(params.xi, params.xi0, annotators, x, labels, post,
                                sigma_min, annotator_ridge, grads);
  const Vector ax = graph.prior_matrix * params.xi;
  value -= graph.eta * params.xi.dot(ax);
  if (grads) {
    // (A + A') xi, exact for the quadratic even if A picked up asymmetric
    // rounding during assembly.
    grads->classifier -=
        graph.eta * (ax + graph.prior_matrix.transpose() * params.xi);
  }
  return value;
}

double observed_loglik(ModelKind kind, const Vector& weights, double bias,
                       const std::vector<AnnotatorParams>& annotators,
                       const Matrix& x, const LabelMatrix& labels,
                       const GraphPrior* graph, double sigma_min) {
  check_shapes(weights, annotators, x, labels);
  const int n = static_cast<int>(x.rows());
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    const auto& obs = labels.labels_of(i);
    if (obs.empty()) continue;  // log sum_z q(z) * 1 == 0 exactly
    const double u = weights.dot(x.row(i)) + bias;
    const auto [log_q, log_1mq] = log_logistic_pair(u);
    double s1 = log_q, s0 = log_1mq;
    for (const Observation& o : obs) {
      const AnnotatorParams& a = annotators.at(o.annotator);
      const double s = std::max(logistic(a.w.dot(x.row(i)) + a.gamma), sigma_min);
      s1 += label_loglik(o.label, 1, s);
      s0 += label_loglik(o.label, 0, s);
    }
    const double hi = std::max(s1, s0);
    total += hi + log1pexp(std::min(s1, s0) - hi);
  }
  if (kind == ModelKind::kLgp) {
    if (!graph) throw std::invalid_argument("observed_loglik: kLgp requires a graph");
    total -= graph->eta * weights.dot(graph->prior_matrix * weights);
  }
  return total;
}

namespace {

// Flat parameter vector for the M-step optimizer:
// [weights(d); bias; per annotator (w(d); gamma) or (gamma) when w is frozen].
struct PackLayout {
  int d = 0;
  int t = 0;
  bool fit_w = true;

  int size() const { return d + 1 + t * (fit_w ? d + 1 : 1); }

  Vector pack(const Vector& weights, double bias,
              const std::vector<AnnotatorParams>& annotators) const {
    Vector theta(size());
    theta.head(d) = weights;
    theta[d] = bias;
    int off = d + 1;
    for (int k = 0; k < t; ++k) {
      if (fit_w) {
        theta.segment(off, d) = annotators[k].w;
        off += d;
      }
      theta[off++] = annotators[k].gamma;
    }
    return theta;
  }

  void unpack(const Vector& theta, Vector& weights, double& bias,
              std::vector<AnnotatorParams>& annotators) const {
    weights = theta.head(d);
    bias = theta[d];
    int off = d + 1;
    for (int k = 0; k < t; ++k) {
      if (fit_w) {
        annotators[k].w = theta.segment(off, d);
        off += d;
      } else {
        annotators[k].w = Vector::Zero(d);
      }
      annotators[k].gamma = theta[off++];
    }
  }

  Vector pack_grads(const MStepGradients& g) const {
    Vector out(size());
    out.head(d) = g.classifier;
    out[d] = g.bias;
    int off = d + 1;
    for (int k = 0; k < t; ++k) {
      if (fit_w) {
        out.segment(off, d) = g.w[k];
        off += d;
      }
      out[off++] = g.gamma[k];
    }
    return out;
  }
};

double squared_annotator_change(const std::vector<AnnotatorParams>& a,
                                const std::vector<AnnotatorParams>& b) {
  double total = 0.0;
  for (std::size_t t = 0; t < a.size(); ++t) {
    total += (a[t].w - b[t].w).squaredNorm();
    const double dg = a[t].gamma - b[t].gamma;
    total += dg * dg;
  }
  return total;
}

}  // namespace

TrainedModel fit(ModelKind kind, const Matrix& x, const LabelMatrix& labels,
                 const GraphPrior* graph, const FitConfig& config,
                 const ScalingParams* scaling) {
  const int n = static_cast<int>(x.rows());
  const int d = static_cast<int>(x.cols());
  const int t_count = labels.num_annotators();
  if (labels.num_points() != n) {
    throw std::invalid_argument("fit: label matrix rows != feature rows");
  }
  if (labels.total_labels() == 0) {
    throw std::invalid_argument("fit: no labels; nothing to learn from");
  }
  if (kind == ModelKind::kLgp) {
    if (!graph) throw std::invalid_argument("fit: kLgp requires a graph prior");
    if (graph->weights.rows() != n) {
      throw std::invalid_argument(
          "fit: graph was built over " + std::to_string(graph->weights.rows()) +
          " points but the training set has " + std::to_string(n));
    }
    if (graph->prior_matrix.rows() != d || graph->prior_matrix.cols() != d) {
      throw std::invalid_argument("fit: graph prior matrix size != feature count");
    }
  }
  if (config.max_em_iterations < 1) {
    throw std::invalid_argument("fit: max_em_iterations must be >= 1");
  }

  TrainedModel model;
  model.kind = kind;
  model.weights = Vector::Zero(d);
  model.bias = 0.0;
  model.annotators.assign(t_count, AnnotatorParams{Vector::Zero(d), 0.0});
  model.scaling = scaling ? *scaling : ScalingParams::identity(d);
  model.sigma_min = config.sigma_min;
  if (kind == ModelKind::kLgp) {
    model.eta = graph->eta;
    model.bandwidth = graph->bandwidth;
  }

  // Initial posterior: additively smoothed annotator majority; 1/2 for
  // unlabeled points.
  Posterior post;
  post.p1.resize(n);
  for (int i = 0; i < n; ++i) {
    const auto& obs = labels.labels_of(i);
    int ones = 0;
    for (const Observation& o : obs) ones += o.label;
    post.p1[i] = (ones + 1.0) / (static_cast<double>(obs.size()) + 2.0);
  }

  PackLayout layout{d, t_count, kind != ModelKind::kMlOriginal};
  double obj_prev = -std::numeric_limits<double>::infinity();

  for (int round = 1; round <= config.max_em_iterations; ++round) {
    const std::vector<AnnotatorParams> prev_annotators = model.annotators;

    Objective surrogate = [&](const Vector& theta, Vector& grad) {
      Vector weights;
      double bias;
      std::vector<AnnotatorParams> ann(t_count, AnnotatorParams{Vector(), 0.0});
      layout.unpack(theta, weights, bias, ann);
      MStepGradients g;
      double value;
      if (kind == ModelKind::kLgp) {
        value = m_step_objective_lgp(LgpParams{weights, bias}, ann, x, labels,
                                     *graph, post, &g, config.sigma_min,
                                     config.annotator_ridge);
      } else {
        value = m_step_objective_id(IdParams{weights, bias}, ann, x, labels,
                                    post, &g, config.sigma_min,
                                    config.annotator_ridge);
      }
      grad = layout.pack_grads(g);
      return value;
    };
    const OptimResult mres =
        maximize(surrogate, layout.pack(model.weights, model.bias, model.annotators),
                 config.mstep);
    layout.unpack(mres.x, model.weights, model.bias, model.annotators);

    post = e_step(model.weights, model.bias, model.annotators, x, labels,
                  config.sigma_min);
    const double obj = observed_loglik(kind, model.weights, model.bias,
                                       model.annotators, x, labels, graph,
                                       config.sigma_min);
    model.diagnostics.objective_history.push_back(obj);
    model.diagnostics.iterations = round;
    if (!std::isfinite(obj)) {
      throw std::runtime_error(
          "fit: observed-data log-likelihood is not finite at round " +
          std::to_string(round));
    }
    if (std::isfinite(obj_prev) && obj < obj_prev - 1e-8) {
      throw std::runtime_error(
          "fit: observed-data log-likelihood decreased at round " +
          std::to_string(round) + " (" + format_g17(obj_prev) + " -> " +
          format_g17(obj) + ")");
    }

    const double change = squared_annotator_change(model.annotators, prev_annotators);
    if (change < config.epsilon) {
      model.diagnostics.converged = true;
    } else if (std::isfinite(obj_prev) &&
               std::abs(obj - obj_prev) < config.objective_tolerance) {
      model.diagnostics.converged = true;
    }
    obj_prev = obj;
    if (model.diagnostics.converged) break;
  }

  model.posterior = post;
  model.diagnostics.final_objective = obj_prev;
  return model;
}

double predict(const TrainedModel& model, const Vector& x_raw,
               const std::vector<Observation>& labels) {
  if (x_raw.size() != model.weights.size()) {
    throw std::invalid_argument("predict: feature size " + std::to_string(x_raw.size()) +
                                " does not match model (" +
                                std::to_string(model.weights.size()) + ")");
  }
  Vector x(x_raw.size());
  for (Eigen::Index j = 0; j < x_raw.size(); ++j) {
    x[j] = (x_raw[j] - model.scaling.mean[j]) / model.scaling.stdev[j];
  }
  const double u = model.weights.dot(x) + model.bias;
  if (labels.empty()) return logistic(u);
  const auto [log_q, log_1mq] = log_logistic_pair(u);
  double s1 = log_q, s0 = log_1mq;
  for (const Observation& o : labels) {
    if (o.annotator < 0 || o.annotator >= static_cast<int>(model.annotators.size())) {
      throw std::out_of_range("predict: annotator index out of range");
    }
    if (o.label != 0 && o.label != 1) {
      throw std::invalid_argument("predict: label must be 0 or 1");
    }
    const AnnotatorParams& a = model.annotators[o.annotator];
    const double s = std::max(logistic(a.w.dot(x) + a.gamma), model.sigma_min);
    s1 += label_loglik(o.label, 1, s);
    s0 += label_loglik(o.label, 0, s);
  }
  return logistic(s1 - s0);
}

namespace {

void write_vector(std::ofstream& out, const std::string& key, const Vector& v) {
  out << key << " =";
  for (Eigen::Index i = 0; i < v.size(); ++i) out << " " << format_g17(v[i]);
  out << "\n";
}

void write_doubles(std::ofstream& out, const std::string& key,
                   const std::vector<double>& v) {
  out << key << " =";
  for (const double x : v) out << " " << format_g17(x);
  out << "\n";
}

Vector parse_vector(const std::string& value, const std::string& context) {
  std::vector<double> vals;
  for (const std::string& tok : split(value, ' ')) {
    if (trim(tok).empty()) continue;
    vals.push_back(parse_double(tok, context));
  }
  Vector v(static_cast<Eigen::Index>(vals.size()));
  for (std::size_t i = 0; i < vals.size(); ++i) v[static_cast<Eigen::Index>(i)] = vals[i];
  return v;
}

}  // namespace

void save_model(const TrainedModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write model file: " + path);
  out << "malss model v1\n";
  out << "kind = " << to_string(model.kind) << "\n";
  out << "features = " << model.weights.size() << "\n";
  out << "annotators = " << model.annotators.size() << "\n";
  write_vector(out, "weights", model.weights);
  out << "bias = " << format_g17(model.bias) << "\n";
  for (std::size_t t = 0; t < model.annotators.size(); ++t) {
    write_vector(out, "w." + std::to_string(t), model.annotators[t].w);
    out << "gamma." << t << " = " << format_g17(model.annotators[t].gamma) << "\n";
  }
  write_vector(out, "scaling_mean", model.scaling.mean);
  write_vector(out, "scaling_std", model.scaling.stdev);
  out << "eta = " << format_g17(model.eta) << "\n";
  out << "bandwidth = " << format_g17(model.bandwidth) << "\n";
  out << "sigma_min = " << format_g17(model.sigma_min) << "\n";
  out << "iterations = " << model.diagnostics.iterations << "\n";
  out << "converged = " << (model.diagnostics.converged ? 1 : 0) << "\n";
  out << "final_objective = " << format_g17(model.diagnostics.final_objective) << "\n";
  write_doubles(out, "objective_history", model.diagnostics.objective_history);
  write_vector(out, "posterior", model.posterior.p1);
}

TrainedModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open model file: " + path);
  std::string line;
  if (!std::getline(in, line) || trim(line) != "malss model v1") {
    throw std::runtime_error(path + ": not a malss v1 model file");
  }
  std::map<std::string, std::string> kv;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error(path + " line " + std::to_string(line_no) +
                               ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    if (kv.count(key)) {
      throw std::runtime_error(path + ": duplicate key '" + key + "'");
    }
    kv[key] = trim(line.substr(eq + 1));
  }
  auto take = [&](const std::string& key) {
    auto it = kv.find(key);
    if (it == kv.end()) {
      throw std::runtime_error(path + ": missing key '" + key + "'");
    }
    const std::string v = it->second;
    kv.erase(it);
    return v;
  };

  TrainedModel model;
  model.kind = model_kind_from_string(take("kind"));
  const long d = parse_long(take("features"), path + " features");
  const long t_count = parse_long(take("annotators"), path + " annotators");
  if (d < 1 || t_count < 0) throw std::runtime_error(path + ": bad dimensions");
  model.weights = parse_vector(take("weights"), path + " weights");
  model.bias = parse_double(take("bias"), path + " bias");
  if (model.weights.size() != d) {
    throw std::runtime_error(path + ": weights length != features");
  }
  for (long t = 0; t < t_count; ++t) {
    AnnotatorParams a;
    a.w = parse_vector(take("w." + std::to_string(t)), path + " w");
    a.gamma = parse_double(take("gamma." + std::to_string(t)), path + " gamma");
    if (a.w.size() != d) {
      throw std::runtime_error(path + ": w." + std::to_string(t) + " length != features");
    }
    model.annotators.push_back(std::move(a));
  }
  model.scaling.mean = parse_vector(take("scaling_mean"), path + " scaling_mean");
  model.scaling.stdev = parse_vector(take("scaling_std"), path + " scaling_std");
  if (model.scaling.mean.size() != d || model.scaling.stdev.size() != d) {
    throw std::runtime_error(path + ": scaling length != features");
  }
  model.eta = parse_double(take("eta"), path + " eta");
  model.bandwidth = parse_double(take("bandwidth"), path + " bandwidth");
  model.sigma_min = parse_double(take("sigma_min"), path + " sigma_min");
  model.diagnostics.iterations =
      static_cast<int>(parse_long(take("iterations"), path + " iterations"));
  model.diagnostics.converged = parse_long(take("converged"), path + " converged") != 0;
  model.diagnostics.final_objective =
      parse_double(take("final_objective"), path + " final_objective");
  const Vector hist = parse_vector(take("objective_history"), path + " objective_history");
  model.diagnostics.objective_history.resize(static_cast<std::size_t>(hist.size()));
  for (Eigen::Index i = 0; i < hist.size(); ++i) {
    model.diagnostics.objective_history[static_cast<std::size_t>(i)] = hist[i];
  }
  model.posterior.p1 = parse_vector(take("posterior"), path + " posterior");
  if (!kv.empty()) {
    throw std::runtime_error(path + ": unknown key '" + kv.begin()->first + "'");
  }
  return model;
}

}  // namespace malss
