// Wizard forms are generated from the server's data-described specs; the
// client validates answers with the same rules before sending them back.

import type { ScalarValue, WizardFieldDoc, WizardSpecDoc } from "./protocol.js";

export interface FieldState {
  field: WizardFieldDoc;
  raw: string;
  error: string | null;
}

export function initialFieldState(field: WizardFieldDoc): FieldState {
  const raw = field.default === null || field.default === undefined ? "" : String(field.default);
  return { field, raw, error: null };
}

export function coerceAnswer(field: WizardFieldDoc, raw: string): ScalarValue {
  switch (field.type) {
    case "text":
      return raw;
    case "int": {
      const value = Number(raw);
      if (!Number.isInteger(value) || raw.trim() === "") {
        throw new Error(`${field.name} must be an integer`);
      }
      return value;
    }
    case "float": {
      const value = Number(raw);
      if (!Number.isFinite(value) || raw.trim() === "") {
        throw new Error(`${field.name} must be a number`);
      }
      return value;
    }
    case "bool": {
      if (raw !== "true" && raw !== "false") {
        throw new Error(`${field.name} must be true or false`);
      }
      return raw === "true";
    }
  }
}

export function checkConstraint(field: WizardFieldDoc, value: ScalarValue): void {
  const rule = field.constraint ?? {};
  if (rule["nonempty"] && (typeof value !== "string" || value.trim() === "")) {
    throw new Error(`${field.name} must not be empty`);
  }
  const oneOf = rule["one_of"] as ScalarValue[] | undefined;
  if (oneOf && !oneOf.includes(value)) {
    throw new Error(`${field.name} must be one of ${oneOf.join(", ")}`);
  }
  const min = rule["min"] as number | undefined;
  if (min !== undefined && typeof value === "number" && value < min) {
    throw new Error(`${field.name} must be at least ${min}`);
  }
  const max = rule["max"] as number | undefined;
  if (max !== undefined && typeof value === "number" && value > max) {
    throw new Error(`${field.name} must be at most ${max}`);
  }
}

// Answers for submission: omitted optional fields fall back server-side.
export function collectAnswers(
  spec: WizardSpecDoc,
  rawValues: Map<string, string>,
): Record<string, ScalarValue> {
  const answers: Record<string, ScalarValue> = {};
  for (const field of spec.fields) {
    const raw = rawValues.get(field.name) ?? "";
    if (raw === "" && !field.required) {
      continue;
    }
    if (raw === "" && field.required) {
      throw new Error(`${field.name} is required`);
    }
    const value = coerceAnswer(field, raw);
    checkConstraint(field, value);
    answers[field.name] = value;
  }
  return answers;
}
