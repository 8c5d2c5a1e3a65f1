//! Staff identities, registration-form validation and password credentials.
//!
//! Passwords are stored only as Argon2id digests. The cost parameters are
//! recorded next to each digest so the defaults can be raised later without
//! invalidating existing credentials.

use std::fmt;
use std::str::FromStr;

use argon2::{Algorithm, Argon2, Params, Version};
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use subtle::ConstantTimeEq;
use zeroize::Zeroizing;

use crate::codec::{b64, hex32};
use crate::entropy::{random_array, EntropySource};
use crate::error::{Error, Result};

pub const STAFF_PREFIX: &str = "EMP/";
pub const STAFF_DIGITS: usize = 5;
pub const MIN_PASSWORD_LEN: usize = 10;
pub const SALT_LEN: usize = 16;

/// True iff `candidate` is `EMP/` followed by exactly five ASCII digits.
pub fn validate_staff_number(candidate: &str) -> bool {
    match candidate.strip_prefix(STAFF_PREFIX) {
        Some(digits) => digits.len() == STAFF_DIGITS && digits.bytes().all(|b| b.is_ascii_digit()),
        None => false,
    }
}

/// Exactly one `@` with something on both sides.
pub fn validate_email(candidate: &str) -> bool {
    let mut parts = candidate.split('@');
    match (parts.next(), parts.next(), parts.next()) {
        (Some(local), Some(domain), None) => {
            !local.is_empty() && !domain.is_empty() && !candidate.chars().any(char::is_whitespace)
        }
        _ => false,
    }
}

/// 7 to 15 digits, optionally preceded by `+`.
pub fn validate_contact_number(candidate: &str) -> bool {
    let digits = candidate.strip_prefix('+').unwrap_or(candidate);
    (7..=15).contains(&digits.len()) && digits.bytes().all(|b| b.is_ascii_digit())
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct StaffNumber(String);

impl StaffNumber {
    pub fn parse(candidate: &str) -> Result<Self> {
        if validate_staff_number(candidate) {
            Ok(Self(candidate.to_owned()))
        } else {
            Err(Error::MalformedField(Field::StaffNumber))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for StaffNumber {
    type Error = Error;

    fn try_from(value: String) -> Result<Self> {
        Self::parse(&value)
    }
}

impl From<StaffNumber> for String {
    fn from(value: StaffNumber) -> Self {
        value.0
    }
}

impl fmt::Display for StaffNumber {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Registration form fields, named for error reporting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Field {
    Name,
    StaffNumber,
    Email,
    ContactNumber,
    Sex,
    Password,
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Field::Name => "name",
            Field::StaffNumber => "staff_number",
            Field::Email => "email",
            Field::ContactNumber => "contact_number",
            Field::Sex => "sex",
            Field::Password => "password",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sex {
    Male,
    Female,
}

impl FromStr for Sex {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "male" => Ok(Sex::Male),
            "female" => Ok(Sex::Female),
            _ => Err(Error::MalformedField(Field::Sex)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Role {
    Admin,
    Officer,
    ReadOnly,
}

impl Role {
    pub const ALL: [Role; 3] = [Role::Admin, Role::Officer, Role::ReadOnly];
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Admin => "Admin",
            Role::Officer => "Officer",
            Role::ReadOnly => "ReadOnly",
        })
    }
}

impl FromStr for Role {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "admin" => Ok(Role::Admin),
            "officer" => Ok(Role::Officer),
            "readonly" => Ok(Role::ReadOnly),
            _ => Err(format!("unknown role `{s}` (expected admin, officer or read-only)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    PendingApproval,
    Active,
    Suspended,
}

/// Argon2id cost parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KdfParams {
    pub memory_kib: u32,
    pub iterations: u32,
    pub parallelism: u32,
}

impl Default for KdfParams {
    /// 64 MiB, three passes.
    fn default() -> Self {
        Self {
            memory_kib: 64 * 1024,
            iterations: 3,
            parallelism: 1,
        }
    }
}

impl KdfParams {
    /// Minimum Argon2 cost. Only for tests and simulations.
    pub const fn insecure_fast() -> Self {
        Self {
            memory_kib: 8,
            iterations: 1,
            parallelism: 1,
        }
    }

    fn hasher(&self) -> Argon2<'static> {
        let params = Params::new(self.memory_kib, self.iterations, self.parallelism, Some(32))
            .unwrap_or_else(|_| Params::new(8, 1, 1, Some(32)).expect("minimum argon2 params"));
        Argon2::new(Algorithm::Argon2id, Version::V0x13, params)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CredentialRecord {
    #[serde(with = "b64")]
    pub salt: Vec<u8>,
    #[serde(with = "hex32")]
    pub digest: [u8; 32],
    pub kdf_params: KdfParams,
}

impl CredentialRecord {
    pub fn derive(password: &str, params: KdfParams, entropy: &dyn EntropySource) -> Result<Self> {
        let salt: [u8; SALT_LEN] = random_array(entropy)?;
        let digest = kdf(password, &salt, params);
        Ok(Self {
            salt: salt.to_vec(),
            digest: *digest,
            kdf_params: params,
        })
    }

    /// Recomputes the digest and compares it in constant time.
    pub fn verify(&self, password: &str) -> bool {
        let candidate = kdf(password, &self.salt, self.kdf_params);
        candidate.ct_eq(&self.digest).into()
    }
}

fn kdf(password: &str, salt: &[u8], params: KdfParams) -> Zeroizing<[u8; 32]> {
    let mut out = Zeroizing::new([0u8; 32]);
    // Params are validated in `hasher`; salts are always >= 8 bytes here.
    params
        .hasher()
        .hash_password_into(password.as_bytes(), salt, out.as_mut())
        .expect("argon2 with validated params");
    out
}

/// Burns one KDF evaluation so unknown identities take as long to reject as
/// wrong passwords.
pub(crate) fn dummy_verify(password: &str, params: KdfParams) {
    let _ = kdf(password, &[0u8; SALT_LEN], params);
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StaffIdentity {
    pub staff_number: StaffNumber,
    pub name: String,
    pub email: String,
    pub contact_number: String,
    pub sex: Sex,
    pub role: Role,
    pub status: Status,
    pub credential: CredentialRecord,
    pub created_at: DateTime<Utc>,
}

/// Public view of an identity, without credential material.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdentitySummary {
    pub staff_number: StaffNumber,
    pub name: String,
    pub email: String,
    pub contact_number: String,
    pub sex: Sex,
    pub role: Role,
    pub status: Status,
    pub created_at: DateTime<Utc>,
}

impl From<&StaffIdentity> for IdentitySummary {
    fn from(id: &StaffIdentity) -> Self {
        Self {
            staff_number: id.staff_number.clone(),
            name: id.name.clone(),
            email: id.email.clone(),
            contact_number: id.contact_number.clone(),
            sex: id.sex,
            role: id.role,
            status: id.status,
            created_at: id.created_at,
        }
    }
}

/// Raw registration input as submitted on the form.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegistrationForm {
    pub name: String,
    pub staff_number: String,
    pub email: String,
    pub contact_number: String,
    pub sex: String,
    pub password: String,
}

/// A form that passed every field check.
#[derive(Debug, Clone)]
pub struct ValidRegistration {
    pub name: String,
    pub staff_number: StaffNumber,
    pub email: String,
    pub contact_number: String,
    pub sex: Sex,
    pub password: Zeroizing<String>,
}

impl RegistrationForm {
    /// Field checks in form order; the first failure wins.
    pub fn validate(&self) -> Result<ValidRegistration> {
        let name = self.name.trim();
        if name.is_empty() || name.chars().any(char::is_control) {
            return Err(Error::MalformedField(Field::Name));
        }
        let staff_number = StaffNumber::parse(self.staff_number.trim())?;
        let email = self.email.trim();
        if !validate_email(email) {
            return Err(Error::MalformedField(Field::Email));
        }
        let contact = self.contact_number.trim();
        if !validate_contact_number(contact) {
            return Err(Error::MalformedField(Field::ContactNumber));
        }
        let sex: Sex = self.sex.trim().parse()?;
        if self.password.is_empty() {
            return Err(Error::MalformedField(Field::Password));
        }
        if self.password.chars().count() < MIN_PASSWORD_LEN {
            return Err(Error::WeakPassword { min: MIN_PASSWORD_LEN });
        }
        Ok(ValidRegistration {
            name: name.to_owned(),
            staff_number,
            email: email.to_ascii_lowercase(),
            contact_number: contact.to_owned(),
            sex,
            password: Zeroizing::new(self.password.clone()),
        })
    }
}
