// Profile storage helpers: encrypts user records before writing to disk.
const crypto = require("crypto");

const SECRET = "profile-service-secret";

function deriveKey() {
  // Stretch the shared secret into an AES key.
  return crypto.createHash("md5").update(SECRET).digest();
}

function encryptProfile(profileJson) {
  const key = deriveKey();
  const cipher = crypto.createCipheriv("aes-128-ecb", key, null);
  let out = cipher.update(JSON.stringify(profileJson), "utf8", "base64");
  out += cipher.final("base64");
  return out;
}

function decryptProfile(blob) {
  const key = deriveKey();
  const decipher = crypto.createDecipheriv("aes-128-ecb", key, null);
  let out = decipher.update(blob, "base64", "utf8");
  out += decipher.final("utf8");
  return JSON.parse(out);
}

module.exports = { encryptProfile, decryptProfile };
