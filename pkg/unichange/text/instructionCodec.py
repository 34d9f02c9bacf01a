#    Copyright (C) 2026 The UniChange Development Team. See the AUTHORS.md file for a full list of copyright holders.
#
#    This file is part of UniChange.
#
#    UniChange is free software: you can redistribute it and/or modify
#    it under the terms of the GNU General Public License as published by
#    the Free Software Foundation, either version 3 of the License, or
#    (at your option) any later version.
#
#    UniChange is distributed in the hope that it will be useful,
#    but WITHOUT ANY WARRANTY; without even the implied warranty of
#    MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
#    GNU General Public License for more details.
#
#    You should have received a copy of the GNU General Public License
#    along with UniChange.  If not, see <http://www.gnu.org/licenses/>.

'''Instruction codec.

A small autoregressive language model standing in for the multimodal LM of
the full system. It reads a change query instruction, produces a response
holding the task tokens ``[T1]``, ``[T2]`` and ``[CHANGE]``, and exposes the
last-layer hidden states at those tokens, projected to the decoder width.
'''

import re
import json
import logging
import dataclasses
from typing import Optional, Tuple

import torch
import torch.nn as nn
import torch.nn.functional as F

from unichange.data.changeTypes import BadArguments, TaskKind, TaskQuery, BACKGROUND_NAME

LOG = logging.getLogger(__package__)

PAD = "<pad>"
BOS = "<bos>"
EOS = "<eos>"
UNK = "<unk>"
T1_TOKEN = "[T1]"
T2_TOKEN = "[T2]"
CHANGE_TOKEN = "[CHANGE]"
SPECIAL_TOKENS = (PAD, BOS, EOS, UNK, T1_TOKEN, T2_TOKEN, CHANGE_TOKEN)
TASK_TOKENS = (T1_TOKEN, T2_TOKEN, CHANGE_TOKEN)

BCD_INSTRUCTION = "please segment all areas that have undergone change."
SCD_INSTRUCTION = "please segment the semantic masks of the changed areas."
BCD_RESPONSE = "the change mask is [CHANGE]."
SCD_RESPONSE = "the semantic masks are [T1] [T2] and the change mask is [CHANGE]."

TEACHER_FORCED = "teacher_forced"
GENERATED = "generated"

_TOKEN_PATTERN = re.compile(r"\[T1\]|\[T2\]|\[CHANGE\]|<[a-z]+>|[A-Za-z0-9_\-]+|[.,:]")


def tokenize(text):
    """ Split text into word-level tokens; words are lowercased, task tokens kept. """
    tokens = []
    for token in _TOKEN_PATTERN.findall(text):
        tokens.append(token if token in SPECIAL_TOKENS else token.lower())
    return tokens


def _classesClause(names):
    return " classes: " + ", ".join(names) + "."


def renderInstruction(query):
    """ Canonical instruction text of a query.

    The text depends only on the task kind and the vocabulary. Binary queries
    with a named (non generic) class mention it, so that sources disagreeing
    on what counts as change receive different instructions.

    :arg TaskQuery query: The query, its own instruction is ignored.
    :rtype: str
    """
    return _instructionFor(query.task, query.vocabulary)


def _instructionFor(task, vocabulary):
    if task == TaskKind.SCD:
        return SCD_INSTRUCTION + _classesClause(vocabulary.names)
    if vocabulary.isGeneric():
        return BCD_INSTRUCTION
    return BCD_INSTRUCTION + _classesClause(vocabulary.names)


def makeTaskQuery(task, vocabulary):
    """ Build a TaskQuery carrying the canonical instruction.

    :arg task: TaskKind or its string name.
    :arg ClassVocabulary vocabulary: Change classes the query refers to.
    :rtype: TaskQuery
    """
    if not isinstance(task, TaskKind):
        task = TaskKind.fromString(task)
    if task == TaskKind.SCD and vocabulary.size < 1:
        raise BadArguments('Error: semantic change queries need at least one class name.\n')
    return TaskQuery(task, _instructionFor(task, vocabulary), vocabulary)


def renderTargetResponse(query):
    """ Target response tokens of a query, one occurrence of each required task token.

    :rtype: list
    """
    if query.task == TaskKind.SCD:
        return tokenize(SCD_RESPONSE)
    return tokenize(BCD_RESPONSE)


class TokenVocabulary(object):
    """ Closed word-level vocabulary.

    Reserved tokens come first and keep their ids, followed by the words of
    the instruction and response templates, ``nochange`` and the words of
    every class name known when the vocabulary is built.
    """
    def __init__(self, classNames=(), tokens=None):
        if tokens is None:
            tokens = list(SPECIAL_TOKENS)
            words = []
            # Two empty names leave the separator of multi-class clauses.
            for text in (BCD_INSTRUCTION, SCD_INSTRUCTION, _classesClause(["", ""]), BCD_RESPONSE,
                         SCD_RESPONSE, BACKGROUND_NAME):
                words.extend(tokenize(text))
            for name in classNames:
                words.extend(tokenize(name))
            for word in words:
                if word not in tokens:
                    tokens.append(word)
        if tuple(tokens[:len(SPECIAL_TOKENS)]) != SPECIAL_TOKENS:
            raise BadArguments('Error: token vocabulary does not start with the reserved tokens.\n')
        self.tokens = list(tokens)
        self.tokenToId = dict((token, index) for index, token in enumerate(self.tokens))
        if len(self.tokenToId) != len(self.tokens):
            raise BadArguments('Error: token vocabulary holds duplicate tokens.\n')

    def __len__(self):
        return len(self.tokens)

    def __eq__(self, other):
        return isinstance(other, TokenVocabulary) and self.tokens == other.tokens

    @property
    def padId(self):
        return self.tokenToId[PAD]

    @property
    def bosId(self):
        return self.tokenToId[BOS]

    @property
    def eosId(self):
        return self.tokenToId[EOS]

    @property
    def unkId(self):
        return self.tokenToId[UNK]

    def taskTokenIds(self):
        """ Ids of ([T1], [T2], [CHANGE]). """
        return tuple(self.tokenToId[token] for token in TASK_TOKENS)

    def covers(self, text):
        return all(token in self.tokenToId for token in tokenize(text))

    def encodeTokens(self, tokens):
        unknown = [token for token in tokens if token not in self.tokenToId]
        if unknown:
            LOG.warning('Tokens outside the vocabulary map to '+UNK+': '+', '.join(unknown))
        return [self.tokenToId.get(token, self.unkId) for token in tokens]

    def encode(self, text):
        return self.encodeTokens(tokenize(text))

    def decode(self, ids):
        text = " ".join(self.tokens[index] for index in ids)
        return re.sub(r" ([.,:])", r"\1", text)

    def toJson(self):
        """ The {token: id} map. """
        return json.dumps(self.tokenToId, indent=1)

    @classmethod
    def fromJson(cls, text):
        tokenToId = json.loads(text)
        tokens = [None] * len(tokenToId)
        for token, index in tokenToId.items():
            if not 0 <= index < len(tokens) or tokens[index] is not None:
                raise BadArguments('Error: token ids in vocabulary map are not contiguous.\n')
            tokens[index] = token
        return cls(tokens=tokens)

    def save(self, path):
        LOG.info('Writing token vocabulary to '+path)
        with open(path, 'w') as vocabularyFile:
            vocabularyFile.write(self.toJson())

    @classmethod
    def load(cls, path):
        LOG.info('Reading token vocabulary from '+path)
        with open(path, 'r') as vocabularyFile:
            return cls.fromJson(vocabularyFile.read())


class CausalBlock(nn.Module):
    """ Pre-norm causal self-attention and feedforward block. """
    def __init__(self, width, heads):
        super(CausalBlock, self).__init__()
        self.norm1 = nn.LayerNorm(width)
        self.attention = nn.MultiheadAttention(width, heads, batch_first=True)
        self.norm2 = nn.LayerNorm(width)
        self.feedforward = nn.Sequential(nn.Linear(width, 4 * width), nn.GELU(), nn.Linear(4 * width, width))

    def forward(self, hidden, causalMask):
        normed = self.norm1(hidden)
        hidden = hidden + self.attention(normed, normed, normed, attn_mask=causalMask, need_weights=False)[0]
        return hidden + self.feedforward(self.norm2(hidden))


class StubLanguageModel(nn.Module):
    """ Decoder-only transformer over the closed token vocabulary.

    :arg int vocabularySize: Number of tokens V.
    :arg int width: Hidden width d_lm.
    :arg int heads: Attention heads per block.
    :arg int layers: Number of causal blocks.
    :arg int maxLength: Longest sequence, prefix vectors included.
    """
    def __init__(self, vocabularySize, width=64, heads=4, layers=2, maxLength=96):
        super(StubLanguageModel, self).__init__()
        self.width = width
        self.maxLength = maxLength
        self.tokenEmbedding = nn.Embedding(vocabularySize, width)
        self.positionEmbedding = nn.Embedding(maxLength, width)
        self.blocks = nn.ModuleList([CausalBlock(width, heads) for _ in range(layers)])
        self.norm = nn.LayerNorm(width)
        self.head = nn.Linear(width, vocabularySize)
        nn.init.normal_(self.tokenEmbedding.weight, std=0.02)
        nn.init.normal_(self.positionEmbedding.weight, std=0.02)

    def forward(self, ids, prefix=None):
        """ Last-layer hidden states and next-token logits.

        :arg ids: (B, n) token ids.
        :arg prefix: Optional (B, p, d_lm) vectors (e.g. image summaries)
          placed before the tokens. Their positions are dropped from the outputs.
        :returns: hidden (B, n, d_lm) and logits (B, n, V).
        """
        hidden = self.tokenEmbedding(ids)
        offset = 0
        if prefix is not None:
            offset = prefix.shape[1]
            hidden = torch.cat([prefix.to(hidden.dtype), hidden], dim=1)
        length = hidden.shape[1]
        if length > self.maxLength:
            raise BadArguments('Error: sequence of length '+str(length)+' exceeds the language model maximum '+
                               str(self.maxLength)+'.\n')
        positions = torch.arange(length, device=ids.device)
        hidden = hidden + self.positionEmbedding(positions)[None]
        causalMask = torch.triu(torch.ones(length, length, dtype=torch.bool, device=ids.device), diagonal=1)
        for block in self.blocks:
            hidden = block(hidden, causalMask)
        hidden = self.norm(hidden)[:, offset:]
        return hidden, self.head(hidden)


def lmLoss(lm, promptIds, targetIds, eosId, prefix=None):
    """ Mean next-token cross-entropy over the target tokens and the closing EOS.

    Prompt positions are excluded.

    :arg StubLanguageModel lm: The language model.
    :arg list promptIds: Prompt ids, BOS first.
    :arg list targetIds: Response ids, without EOS.
    :arg int eosId: End of sequence id appended to the target.
    :rtype: torch.Tensor
    """
    loss, _ = _teacherForcedPass(lm, promptIds, targetIds, eosId, prefix)
    return loss


def _teacherForcedPass(lm, promptIds, targetIds, eosId, prefix=None):
    if len(promptIds) == 0 or len(targetIds) == 0:
        raise BadArguments('Error: prompt and target must be non-empty.\n')
    device = lm.head.weight.device
    sequence = torch.tensor([list(promptIds) + list(targetIds) + [eosId]], device=device)
    hidden, logits = lm(sequence[:, :-1], prefix)
    start = len(promptIds) - 1
    loss = F.cross_entropy(logits[0, start:], sequence[0, start + 1:])
    return loss, hidden[0]


@torch.no_grad()
def generate(lm, promptIds, maxLength, eosId, prefix=None):
    """ Greedy decoding.

    Stops after EOS (not returned) or after ``maxLength`` tokens.

    :rtype: list
    """
    if len(promptIds) == 0:
        raise BadArguments('Error: generation needs a non-empty prompt.\n')
    device = lm.head.weight.device
    ids = list(promptIds)
    response = []
    room = lm.maxLength - len(ids) - (0 if prefix is None else prefix.shape[1])
    for _ in range(min(maxLength, room)):
        _, logits = lm(torch.tensor([ids], device=device), prefix)
        nextId = int(torch.argmax(logits[0, -1]).item())
        if nextId == eosId:
            break
        ids.append(nextId)
        response.append(nextId)
    return response


@dataclasses.dataclass
class TaskEmbeddings:
    """ Hidden states at the task tokens, raw and projected.

    ``projected`` stacks the rows (t1, t2, change) with shape (3, d_dec);
    rows of absent tokens hold the learned default queries.
    """
    raw: Tuple[Optional[torch.Tensor], Optional[torch.Tensor], Optional[torch.Tensor]]
    projected: torch.Tensor
    present: Tuple[bool, bool, bool]
    txtLoss: Optional[torch.Tensor] = None

    @property
    def hT1(self):
        return self.projected[0]

    @property
    def hT2(self):
        return self.projected[1]

    @property
    def hChange(self):
        return self.projected[2]


def _requiredTokens(task):
    if task == TaskKind.SCD:
        return (True, True, True)
    return (False, False, True)


class InstructionCodec(nn.Module):
    """ Language model, task-token projection and fallback queries. """
    def __init__(self, vocabulary, decoderWidth=64, lmWidth=64, heads=4, layers=2, maxLength=96):
        super(InstructionCodec, self).__init__()
        self.vocabulary = vocabulary
        self.lm = StubLanguageModel(len(vocabulary), lmWidth, heads, layers, maxLength)
        self.projection = nn.Sequential(nn.Linear(lmWidth, lmWidth), nn.GELU(), nn.Linear(lmWidth, decoderWidth))
        self.defaultQueries = nn.Parameter(0.02 * torch.randn(3, decoderWidth))

    def promptIds(self, query):
        return [self.vocabulary.bosId] + self.vocabulary.encode(query.instruction)

    def targetIds(self, query):
        return self.vocabulary.encodeTokens(renderTargetResponse(query))

    def lmLoss(self, query, prefix=None):
        return lmLoss(self.lm, self.promptIds(query), self.targetIds(query), self.vocabulary.eosId, prefix)

    def generate(self, query, maxLength=16, prefix=None):
        return generate(self.lm, self.promptIds(query), maxLength, self.vocabulary.eosId, prefix)

    def extractTaskEmbeddings(self, query, mode=TEACHER_FORCED, response=None, maxLength=16, prefix=None):
        """ Task embeddings of a query.

        In teacher-forced mode the response is the rendered target and the
        text loss of the same pass is attached. In generated mode the
        response is decoded greedily unless given; task tokens missing from it,
        as well as tokens the task does not use, take the default queries and
        are flagged absent.

        :rtype: TaskEmbeddings
        """
        promptIds = self.promptIds(query)
        txtLoss = None
        if mode == TEACHER_FORCED:
            response = self.targetIds(query)
            txtLoss, hidden = _teacherForcedPass(self.lm, promptIds, response, self.vocabulary.eosId, prefix)
        elif mode == GENERATED:
            if response is None:
                response = generate(self.lm, promptIds, maxLength, self.vocabulary.eosId, prefix)
            device = self.lm.head.weight.device
            hidden, _ = self.lm(torch.tensor([promptIds + list(response)], device=device), prefix)
            hidden = hidden[0]
        else:
            raise BadArguments('Error: unknown embedding extraction mode '+str(mode)+'.\n')
        required = _requiredTokens(query.task)
        raw = []
        present = []
        rows = []
        for slot, tokenId in enumerate(self.vocabulary.taskTokenIds()):
            position = None
            if required[slot] and tokenId in response:
                position = len(promptIds) + list(response).index(tokenId)
            if position is None:
                raw.append(None)
                present.append(False)
                rows.append(self.defaultQueries[slot])
            else:
                raw.append(hidden[position])
                present.append(True)
                rows.append(self.projection(hidden[position]))
        if mode == GENERATED and not any(present):
            LOG.warning('Generated response holds no task token: '+self.vocabulary.decode(response))
        return TaskEmbeddings(tuple(raw), torch.stack(rows), tuple(present), txtLoss)

    def classNameEmbeddings(self, vocabulary):
        """ One embedding per label, background first: the mean token embedding of each name's words.

        :arg ClassVocabulary vocabulary: The change classes.
        :returns: (N+1, d_lm) tensor.
        """
        device = self.lm.head.weight.device
        rows = []
        for name in vocabulary.labelNames():
            ids = torch.tensor(self.vocabulary.encode(name), device=device)
            rows.append(self.lm.tokenEmbedding(ids).mean(dim=0))
        return torch.stack(rows)
