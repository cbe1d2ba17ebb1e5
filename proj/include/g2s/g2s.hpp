#pragma once

#include "g2s/autodiff.hpp"
#include "g2s/checkpoint.hpp"
#include "g2s/config.hpp"
#include "g2s/corpus.hpp"
#include "g2s/decoder.hpp"
#include "g2s/encoders.hpp"
#include "g2s/error.hpp"
#include "g2s/grad_check.hpp"
#include "g2s/keywords.hpp"
#include "g2s/model.hpp"
#include "g2s/pipeline.hpp"
#include "g2s/search.hpp"
#include "g2s/stats.hpp"
#include "g2s/topic_graph.hpp"
#include "g2s/training.hpp"
