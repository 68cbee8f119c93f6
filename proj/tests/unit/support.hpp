#pragma once

// Shared generators and small independent oracles for the unit tests.

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "circqa/dataset.hpp"
#include "circqa/diagram.hpp"
#include "circqa/grammar.hpp"
#include "circqa/kernels.hpp"

namespace testsupport {

using circqa::cplx;
using Rng = std::mt19937_64;

inline std::size_t pick(Rng& rng, std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); }

template <class Seq>
std::string pick_word(Rng& rng, const Seq& seq) {
  return std::string(seq[pick(rng, seq.size())]);
}

/// Random sentence over at most `people` people, `locations` locations, `objects` objects.
inline circqa::SentenceAst random_sentence(Rng& rng, std::size_t people = 8, std::size_t locations = 8,
                                           std::size_t objects = 4) {
  using namespace circqa;
  const std::string person(vocab::kPeople[pick(rng, people)]);
  switch (pick(rng, 5)) {
    case 0:
      return MoveSentence{person, std::string(vocab::kLocations[pick(rng, locations)]), pick_word(rng, vocab::kMoveVerbs),
                          pick(rng, 2) == 0};
    case 1:
      return MoveSentence{person, std::string(vocab::kLocations[pick(rng, locations)]),
                          pick_word(rng, vocab::kJourneyVerbs), pick(rng, 2) == 0};
    case 2:
      return ObjectSentence{person, std::string(vocab::kObjects[pick(rng, objects)]), pick_word(rng, vocab::kGrabVerbs),
                            ""};
    case 3:
      return ObjectSentence{person, std::string(vocab::kObjects[pick(rng, objects)]), "picked", "up"};
    default:
      return ObjectSentence{person, std::string(vocab::kObjects[pick(rng, objects)]), "put", "down"};
  }
}

inline circqa::Story random_story(Rng& rng, std::size_t n, std::size_t people = 8, std::size_t locations = 8,
                                  std::size_t objects = 4) {
  std::vector<circqa::SentenceAst> s;
  for (std::size_t i = 0; i < n; ++i) s.push_back(random_sentence(rng, people, locations, objects));
  return circqa::Story::from_sentences(std::move(s));
}

inline circqa::Question random_question(Rng& rng, const circqa::Story& story, std::size_t locations = 8) {
  const auto people = story.people();
  return {people[pick(rng, people.size())], std::string(circqa::vocab::kLocations[pick(rng, locations)])};
}

/// Moves every noun-state layer to the front, keeping relative order. Noun
/// states act on fresh wires, so this never changes the semantics.
inline circqa::Diagram hoist_noun_states(const circqa::Diagram& d) {
  circqa::Diagram out;
  out.wires = d.wires;
  for (const auto& l : d.layers) {
    const auto* b = std::get_if<circqa::BoxNode>(&l.node);
    if (b && b->role == circqa::BoxRole::NounState) out.layers.push_back(l);
  }
  for (const auto& l : d.layers) {
    const auto* b = std::get_if<circqa::BoxNode>(&l.node);
    if (!(b && b->role == circqa::BoxRole::NounState)) out.layers.push_back(l);
  }
  return out;
}

/// Independent last-location oracle: scan backwards for the person's last move.
inline circqa::Answer scan_oracle(const circqa::Story& story, const circqa::Question& q) {
  for (auto it = story.sentences.rbegin(); it != story.sentences.rend(); ++it) {
    if (const auto* m = std::get_if<circqa::MoveSentence>(&*it); m && m->person == q.person)
      return m->location == q.location ? circqa::Answer::Yes : circqa::Answer::No;
  }
  return circqa::Answer::No;
}

// Dense textbook gates, independent of the library's gate compiler.

using Matrix = std::vector<cplx>;  // row-major, square

inline Matrix identity(std::size_t dim) {
  Matrix m(dim * dim, 0.0);
  for (std::size_t i = 0; i < dim; ++i) m[i * dim + i] = 1.0;
  return m;
}

inline Matrix matmul(const Matrix& a, const Matrix& b, std::size_t dim) {
  Matrix c(dim * dim, 0.0);
  for (std::size_t i = 0; i < dim; ++i)
    for (std::size_t k = 0; k < dim; ++k)
      for (std::size_t j = 0; j < dim; ++j) c[i * dim + j] += a[i * dim + k] * b[k * dim + j];
  return c;
}

inline Matrix adjoint(const Matrix& a, std::size_t dim) {
  Matrix c(dim * dim);
  for (std::size_t i = 0; i < dim; ++i)
    for (std::size_t j = 0; j < dim; ++j) c[j * dim + i] = std::conj(a[i * dim + j]);
  return c;
}

inline std::array<cplx, 4> rz(double t) {
  return {std::polar(1.0, -t / 2), 0.0, 0.0, std::polar(1.0, t / 2)};
}
inline std::array<cplx, 4> rx(double t) {
  const double c = std::cos(t / 2), s = std::sin(t / 2);
  return {c, cplx(0, -s), cplx(0, -s), c};
}

/// Full 2^n matrix of g on qubit `target`, optionally conditioned on `control` (bit i = qubit i).
inline Matrix embed(std::size_t n, std::size_t target, const std::array<cplx, 4>& g, long control = -1) {
  const std::size_t dim = std::size_t{1} << n;
  Matrix m(dim * dim, 0.0);
  for (std::size_t col = 0; col < dim; ++col) {
    if (control >= 0 && !((col >> control) & 1)) {
      m[col * dim + col] = 1.0;
      continue;
    }
    const std::size_t b = (col >> target) & 1;
    for (std::size_t r = 0; r < 2; ++r) {
      const std::size_t row = (col & ~(std::size_t{1} << target)) | (r << target);
      m[row * dim + col] += g[r * 2 + b];
    }
  }
  return m;
}

/// Euler Rz(p0) Rx(p1) Rz(p2) for k = 1; stacked Sim4 layers (Rx wall, Rz wall,
/// CRx cascade j -> j+1) otherwise.
inline Matrix reference_unitary(std::size_t k, const std::vector<double>& p, int layers) {
  const std::size_t dim = std::size_t{1} << k;
  Matrix u = identity(dim);
  auto then = [&](const Matrix& g) { u = matmul(g, u, dim); };
  if (k == 1) {
    then(embed(1, 0, rz(p[2])));
    then(embed(1, 0, rx(p[1])));
    then(embed(1, 0, rz(p[0])));
    return u;
  }
  std::size_t idx = 0;
  for (int l = 0; l < layers; ++l) {
    for (std::size_t i = 0; i < k; ++i) then(embed(k, i, rx(p[idx++])));
    for (std::size_t i = 0; i < k; ++i) then(embed(k, i, rz(p[idx++])));
    for (std::size_t j = 0; j + 1 < k; ++j) then(embed(k, j + 1, rx(p[idx++]), static_cast<long>(j)));
  }
  return u;
}

/// <a| Tr_rest(|psi><psi|) |a> by explicit summation over the traced-out bits.
inline double reference_overlap(const std::vector<cplx>& psi, std::size_t n, const std::vector<cplx>& a, std::size_t w0,
                                std::size_t w1) {
  double total = 0.0;
  const std::size_t dim = std::size_t{1} << n;
  for (std::size_t rest = 0; rest < dim; ++rest) {
    if ((rest >> w0) & 1 || (rest >> w1) & 1) continue;
    cplx amp = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
      const std::size_t idx = rest | ((i & 1) << w0) | (((i >> 1) & 1) << w1);
      amp += std::conj(a[i]) * psi[idx];
    }
    total += std::norm(amp);
  }
  return total;
}

}  // namespace testsupport
