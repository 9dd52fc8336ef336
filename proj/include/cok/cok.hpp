#pragma once

// Chain-of-knowledge prompting pipeline: triple KBs, TransR-style energy
// scoring, structured response parsing, reliability verification, and the
// iterative rethinking loop.

#include "cok/dataset.hpp"
#include "cok/embedding.hpp"
#include "cok/encoder.hpp"
#include "cok/errors.hpp"
#include "cok/exemplar.hpp"
#include "cok/hashing.hpp"
#include "cok/http.hpp"
#include "cok/io.hpp"
#include "cok/kb.hpp"
#include "cok/linalg.hpp"
#include "cok/llm.hpp"
#include "cok/parse.hpp"
#include "cok/prompt.hpp"
#include "cok/report.hpp"
#include "cok/rethink.hpp"
#include "cok/rng.hpp"
#include "cok/text.hpp"
#include "cok/triple.hpp"
#include "cok/verify.hpp"
