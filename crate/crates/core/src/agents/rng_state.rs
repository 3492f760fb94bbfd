//! Serde adapter for generator state. The stock ChaCha representation
//! carries a `u128` word position, which JSON readers reject inside tagged
//! enums, so the position is stored as a decimal string instead.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Serialize, Deserialize)]
struct State {
    seed: String,
    stream: u64,
    word_pos: String,
}

pub fn serialize<S: Serializer>(rng: &ChaCha8Rng, s: S) -> Result<S::Ok, S::Error> {
    State {
        seed: hex::encode(rng.get_seed()),
        stream: rng.get_stream(),
        word_pos: rng.get_word_pos().to_string(),
    }
    .serialize(s)
}

pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<ChaCha8Rng, D::Error> {
    use rand::SeedableRng;
    use serde::de::Error;

    let st = State::deserialize(d)?;
    let mut seed = [0u8; 32];
    hex::decode_to_slice(&st.seed, &mut seed).map_err(D::Error::custom)?;
    let word_pos: u128 = st.word_pos.parse().map_err(D::Error::custom)?;
    let mut rng = ChaCha8Rng::from_seed(seed);
    rng.set_stream(st.stream);
    rng.set_word_pos(word_pos);
    Ok(rng)
}
