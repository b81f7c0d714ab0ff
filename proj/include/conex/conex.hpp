#pragma once

#include "conex/corpus.hpp"
#include "conex/embedding.hpp"
#include "conex/error.hpp"
#include "conex/csv.hpp"
#include "conex/rng.hpp"
#include "conex/synthetic.hpp"
#include "conex/pipeline.hpp"
#include "conex/annotation.hpp"
#include "conex/evaluator.hpp"
#include "conex/hearst.hpp"
#include "conex/pointer_head.hpp"
#include "conex/profile.hpp"
#include "conex/pruner.hpp"
#include "conex/selector.hpp"
#include "conex/span_decoder.hpp"
#include "conex/text.hpp"
