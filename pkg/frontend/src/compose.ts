// The skill composer: turns picker selections or grid clicks into the exact
// command lines the server grammar accepts. Novice users click these
// controls; expert users type raw lines into the free-text box instead.

export const ACTION_RELATIONS = [
  "In Front Of",
  "Behind",
  "To The Left Of",
  "To The Right Of",
  "Stacked On",
] as const;

export type ActionRelation = (typeof ACTION_RELATIONS)[number];

export interface ComposerState {
  subject: string | null;
  relation: ActionRelation | null;
  target: string | null;
}

export function composeRelationMove(
  subject: string,
  relation: ActionRelation,
  target: string,
): string {
  return `move(${subject}, ${relation}, ${target})`;
}

export function composeGridMove(subject: string, cell: string): string {
  return `move(${subject}, ${cell})`;
}

export function composeArrange(subject: string): string {
  return `arrange(${subject})`;
}

/** The line a full picker selection produces, or null while incomplete. */
export function composerLine(state: ComposerState): string | null {
  if (!state.subject) return null;
  if (state.relation && state.target) {
    return composeRelationMove(state.subject, state.relation, state.target);
  }
  return null;
}

/** A grid-cell click needs only a selected subject. */
export function gridClickLine(state: ComposerState, cell: string): string | null {
  if (!state.subject) return null;
  return composeGridMove(state.subject, cell);
}
