use crate::codec::{DecodeError, Decoder, Encoder};
use crate::crypto::{self, Digest, KeyError, KeyPair, PublicKey, Signature};

/// Transfer fields before signing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UnsignedTransaction {
    pub sender: PublicKey,
    pub recipient: PublicKey,
    pub amount: u64,
    pub nonce: u64,
    /// Wall-clock milliseconds at creation.
    pub created_at: u64,
}

impl UnsignedTransaction {
    fn encode_into(&self, e: &mut Encoder) {
        e.bytes(&self.sender.0)
            .bytes(&self.recipient.0)
            .u64(self.amount)
            .u64(self.nonce)
            .u64(self.created_at);
    }

    pub fn signing_bytes(&self) -> Vec<u8> {
        let mut e = Encoder::with_capacity(104);
        self.encode_into(&mut e);
        e.finish()
    }
}

/// A signed account-model transfer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Transaction {
    pub body: UnsignedTransaction,
    pub signature: Signature,
}

impl Transaction {
    pub fn sender(&self) -> &PublicKey {
        &self.body.sender
    }

    pub fn recipient(&self) -> &PublicKey {
        &self.body.recipient
    }

    pub fn amount(&self) -> u64 {
        self.body.amount
    }

    pub fn nonce(&self) -> u64 {
        self.body.nonce
    }

    pub fn encode_into(&self, e: &mut Encoder) {
        self.body.encode_into(e);
        e.bytes(&self.signature.0);
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut e = Encoder::with_capacity(172);
        self.encode_into(&mut e);
        e.finish()
    }

    pub fn decode_from(d: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        let body = UnsignedTransaction {
            sender: PublicKey(d.array("sender")?),
            recipient: PublicKey(d.array("recipient")?),
            amount: d.u64()?,
            nonce: d.u64()?,
            created_at: d.u64()?,
        };
        let signature = Signature(d.array("signature")?);
        Ok(Self { body, signature })
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut d = Decoder::new(bytes);
        let tx = Self::decode_from(&mut d)?;
        d.finish()?;
        Ok(tx)
    }

    /// SHA-256 of the full canonical serialization, signature included.
    pub fn id(&self) -> Digest {
        crypto::sha256(&self.to_bytes())
    }

    pub fn verify_signature(&self) -> bool {
        crypto::verify(
            &self.body.sender,
            &self.body.signing_bytes(),
            &self.signature,
        )
    }
}

/// Signs every field of `tx` with `private_key`.
pub fn sign_transaction(
    tx: UnsignedTransaction,
    private_key: &[u8],
) -> Result<Transaction, KeyError> {
    let kp = KeyPair::from_private_key(private_key)?;
    Ok(sign_with(tx, &kp))
}

pub fn sign_with(tx: UnsignedTransaction, key: &KeyPair) -> Transaction {
    let signature = key.sign(&tx.signing_bytes());
    Transaction {
        body: tx,
        signature,
    }
}
