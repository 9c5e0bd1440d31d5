// Bundled example models for the editor menu: the same small domains
// the backend test fixtures use, so a fresh console can submit a
// working solve in two clicks.

export interface ExampleEntry {
  id: string;
  title: string;
  domain: string;
  problem: string;
}

const BLOCKSWORLD_DOMAIN = `; Three-operator-per-block blocksworld with a one-block gripper hand.
(define (domain blocksworld)
  (:requirements :strips :equality)
  (:predicates
    (on ?x ?y)
    (ontable ?x)
    (clear ?x)
    (handempty)
    (holding ?x))
  (:action pickup
    :parameters (?x)
    :precondition (and (clear ?x) (ontable ?x) (handempty))
    :effect (and (holding ?x)
                 (not (clear ?x)) (not (ontable ?x)) (not (handempty))))
  (:action putdown
    :parameters (?x)
    :precondition (and (holding ?x))
    :effect (and (clear ?x) (ontable ?x) (handempty)
                 (not (holding ?x))))
  (:action stack
    :parameters (?x ?y)
    :precondition (and (holding ?x) (clear ?y) (not (= ?x ?y)))
    :effect (and (on ?x ?y) (clear ?x) (handempty)
                 (not (holding ?x)) (not (clear ?y))))
  (:action unstack
    :parameters (?x ?y)
    :precondition (and (on ?x ?y) (clear ?x) (handempty) (not (= ?x ?y)))
    :effect (and (holding ?x) (clear ?y)
                 (not (on ?x ?y)) (not (clear ?x)) (not (handempty)))))
`;

const BLOCKSWORLD_PROBLEM = `; Three blocks, c sitting on a, goal tower a-b-c.
(define (problem sussman)
  (:domain blocksworld)
  (:objects a b c)
  (:init (ontable a) (ontable b) (on c a)
         (clear b) (clear c) (handempty))
  (:goal (and (on a b) (on b c))))
`;

const GRIPPER_DOMAIN = `; Typed gripper: a robot with two grippers ferries balls between rooms.
(define (domain gripper)
  (:requirements :strips :typing :equality)
  (:types room ball gripper - object)
  (:predicates
    (at-robby ?r - room)
    (at ?b - ball ?r - room)
    (free ?g - gripper)
    (carrying ?b - ball ?g - gripper))
  (:action move
    :parameters (?from ?to - room)
    :precondition (and (at-robby ?from) (not (= ?from ?to)))
    :effect (and (at-robby ?to) (not (at-robby ?from))))
  (:action pick
    :parameters (?b - ball ?r - room ?g - gripper)
    :precondition (and (at ?b ?r) (at-robby ?r) (free ?g))
    :effect (and (carrying ?b ?g) (not (at ?b ?r)) (not (free ?g))))
  (:action drop
    :parameters (?b - ball ?r - room ?g - gripper)
    :precondition (and (carrying ?b ?g) (at-robby ?r))
    :effect (and (at ?b ?r) (free ?g) (not (carrying ?b ?g)))))
`;

const GRIPPER_PROBLEM = `; Two balls in room a, both wanted in room b.
(define (problem gripper-two-balls)
  (:domain gripper)
  (:objects rooma roomb - room
            ball1 ball2 - ball
            left right - gripper)
  (:init (at-robby rooma)
         (free left) (free right)
         (at ball1 rooma) (at ball2 rooma))
  (:goal (and (at ball1 roomb) (at ball2 roomb))))
`;

export const EXAMPLES: ExampleEntry[] = [
  {
    id: 'blocksworld',
    title: 'Blocksworld — Sussman anomaly',
    domain: BLOCKSWORLD_DOMAIN,
    problem: BLOCKSWORLD_PROBLEM,
  },
  {
    id: 'gripper',
    title: 'Gripper — two balls',
    domain: GRIPPER_DOMAIN,
    problem: GRIPPER_PROBLEM,
  },
];

export function exampleById(id: string): ExampleEntry | undefined {
  return EXAMPLES.find((entry) => entry.id === id);
}
