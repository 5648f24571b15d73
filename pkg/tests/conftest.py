import pytest

from ctrlgen.vocab import Vocabulary


def make_tiny_vocab(n_entities: int = 2) -> Vocabulary:
    """Smallest legal vocabulary (20 tokens with 2 entities): the special
    tokens, one terminator, the 13 control slots, and entity tokens. Keeps
    gradient-check dimensions small."""
    tokens = ["</s>", "but", "[MASK]", "<ent>", ".1"]
    length_controls = tuple(range(5, 15))
    tokens += [f"<len_{i}>" for i in range(1, 11)]
    abs_controls = (15, 16, 17)
    tokens += [f"<abs_{i}>" for i in range(1, 4)]
    entities = tuple(range(18, 18 + n_entities))
    tokens += [f"ent{i:02d}" for i in range(n_entities)]
    return Vocabulary(
        tokens=tuple(tokens),
        eos=0,
        terminators=(4,),
        but=1,
        mask=2,
        entity_sep=3,
        entities=entities,
        length_controls=length_controls,
        abs_controls=abs_controls,
        content_words=(),
        synonyms=(),
    )


@pytest.fixture(scope="session")
def tiny_vocab() -> Vocabulary:
    return make_tiny_vocab()
