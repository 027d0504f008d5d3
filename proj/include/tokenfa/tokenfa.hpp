#ifndef TOKENFA_TOKENFA_HPP
#define TOKENFA_TOKENFA_HPP

#include "tokenfa/automata.hpp"
#include "tokenfa/error.hpp"
#include "tokenfa/regex.hpp"
#include "tokenfa/remote_scorer.hpp"
#include "tokenfa/scorer.hpp"
#include "tokenfa/scorer_spec.hpp"
#include "tokenfa/token_automaton.hpp"
#include "tokenfa/traversal.hpp"
#include "tokenfa/vocabulary.hpp"

#include "tokenfa/harness/bias.hpp"
#include "tokenfa/harness/config.hpp"
#include "tokenfa/harness/language_understanding.hpp"
#include "tokenfa/harness/memorization.hpp"
#include "tokenfa/harness/report.hpp"
#include "tokenfa/harness/stop_words.hpp"
#include "tokenfa/harness/url_validation.hpp"

#endif
