#pragma once

// Expression handle over a Tape node so model code reads like arithmetic.

#include "eidgm/diff/tape.hpp"

namespace eidgm::diff {

struct Var {
  Tape* tape = nullptr;
  NodeId id = 0;

  const Matrix& value() const { return tape->value(id); }
};

inline Var operator+(Var a, Var b) { return {a.tape, a.tape->add(a.id, b.id)}; }
inline Var operator-(Var a, Var b) { return {a.tape, a.tape->sub(a.id, b.id)}; }
inline Var operator*(Var a, Var b) { return {a.tape, a.tape->mul(a.id, b.id)}; }
inline Var operator/(Var a, Var b) { return {a.tape, a.tape->div(a.id, b.id)}; }
inline Var operator-(Var a) { return {a.tape, a.tape->scale(a.id, -1.0)}; }

inline Var operator*(Var a, double c) { return {a.tape, a.tape->scale(a.id, c)}; }
inline Var operator*(double c, Var a) { return a * c; }
inline Var operator/(Var a, double c) { return a * (1.0 / c); }
inline Var operator+(Var a, double c) { return {a.tape, a.tape->add_scalar(a.id, c)}; }
inline Var operator+(double c, Var a) { return a + c; }
inline Var operator-(Var a, double c) { return a + (-c); }
inline Var operator-(double c, Var a) { return (-a) + c; }

inline Var tanh(Var a) { return {a.tape, a.tape->tanh(a.id)}; }
inline Var square(Var a) { return {a.tape, a.tape->square(a.id)}; }
inline Var sqrt(Var a) { return {a.tape, a.tape->sqrt(a.id)}; }
inline Var sum(Var a) { return {a.tape, a.tape->sum(a.id)}; }
inline Var mean(Var a) { return {a.tape, a.tape->mean(a.id)}; }
inline Var column(Var a, std::size_t c) { return {a.tape, a.tape->slice_cols(a.id, c, 1)}; }

}  // namespace eidgm::diff
